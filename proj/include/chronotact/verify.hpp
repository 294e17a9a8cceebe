#pragma once

#include <string>
#include <vector>

#include "chronotact/synthesis.hpp"

namespace chronotact {

struct VerifyOptions {
  // |M - |phi_hat|_*| <= tol_eq28_rel * M
  double tol_eq28_rel = 1e-5;
  // Negative selects 1e-6 * (1 + |y0|).
  double tol_terminal = -1.0;
  // Level and sign agreement with the sign formula, relative to M.
  double tol_level_rel = 1e-9;
  // Half-width of the neighborhoods of switch times excluded from sampling,
  // relative to t_star.
  double exclusion_rel = 1e-3;
  MinimizeOptions minimize;
};

struct OptimalityReport {
  bool eq27_ok = false;
  double eq27_max_dev = 0.0;
  double eq28_residual = 0.0;
  double terminal_residual = 0.0;
  double el_residual = 0.0;
  bool bangbang_ok = false;
  bool accept = false;
  int samples = 0;
  std::vector<std::string> notes;
};

struct TerminalCheck {
  double propagated = 0.0;  // |y(T)| by forward propagation
  double duality = 0.0;     // max_j of the duality identity on basis data
  double value = 0.0;       // max of both
};

struct OracleResult {
  double M_est = 0.0;
  BangBangControl best_schedule;
  long candidates = 0;
};

/// Necessary and sufficient optimality test for a claimed optimal time and
/// control: sign formula against the minimizer of J^{t_star}, the integral
/// identity M = |phi_hat|_*, and the terminal condition.
OptimalityReport check_time_optimality(const ProblemSpec& spec, double M,
                                       double t_star,
                                       const BangBangControl& control,
                                       const VerifyOptions& opts = {});

/// Every channel level equals k_i * M within 1e-9 relative.
bool check_bangbang(const BangBangControl& control, double M,
                    const ProblemSpec& spec);

/// Exhaustive search over per-channel sign schedules whose switch times lie on
/// the interior points of a uniform grid with `grid_density` intervals. Each
/// schedule's level is the smallest one leaving |y(T)| <= tol (negative tol
/// selects 1e-6 * (1 + |y0|)). Exponential by design: d <= 2, max_switches <= 3.
OracleResult brute_force_norm_opt(const ProblemSpec& spec, double T,
                                  int max_switches, int grid_density,
                                  double tol = -1.0);

/// |y(T)| by propagation, cross-checked by the duality identity
/// int sum_i u^i <b_i, phi_j> + <phi_j(0), y0> = 0 on the canonical terminal
/// data. The duality part needs a bang-bang control; sampled controls report
/// propagation only.
TerminalCheck terminal_residual(const ProblemSpec& spec, const Control& control,
                                double T, const Vector& y0,
                                const OdeOptions& opts = {});

}  // namespace chronotact
