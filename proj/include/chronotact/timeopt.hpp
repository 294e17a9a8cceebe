#pragma once

#include <optional>
#include <vector>

#include "chronotact/verify.hpp"

namespace chronotact {

struct TimeOptOptions {
  double t0 = 1.0;
  int K_max = 64;
  // Negative selects 1e-9 * max(1, t0).
  double tol_T = -1.0;
  // Negative selects 1e-9 * M.
  double tol_M = -1.0;
  int n_max = 200;
  // Stop as soon as |M_tilde(t_n) - M| <= tol_M.
  bool early_exit = true;
  SynthesisOptions synthesis;
  VerifyOptions verify;
  // solve_time_optimal throws VerificationFailed on a rejected report.
  bool throw_on_reject = true;
};

struct BisectionEntry {
  int n = 0;
  double t = 0.0;
  double M_tilde = 0.0;
  double a = 0.0;
  double b = 0.0;
  // Norm-optimal control at t_n.
  BangBangControl control;
};

struct BisectionTrace {
  double t0 = 0.0;
  int K = 0;
  std::vector<BisectionEntry> entries;
  bool converged = false;
};

struct TimeOptResult {
  double M = 0.0;
  double t_star = 0.0;
  BangBangControl control;
  BisectionTrace trace;
  double M_check = 0.0;
  double el_residual = 0.0;
  std::optional<OptimalityReport> verification;
};

/// K = min{k >= 1 : M_tilde(k t0) < M}.
int find_horizon_K(const ProblemSpec& spec, double M, double t0, int K_max,
                   const MinimizeOptions& opts = {});

/// Bisection on [0, K t0]: the left end moves to t_n when M_tilde(t_n) > M,
/// otherwise the right end does.
TimeOptResult bisect_optimal_time(const ProblemSpec& spec, double M,
                                  const TimeOptOptions& opts = {});

/// Optimal time and control for the bound M, with the optimality check
/// attached.
TimeOptResult solve_time_optimal(const ProblemSpec& spec, double M,
                                 const TimeOptOptions& opts = {});

struct RoundTripReport {
  struct HorizonRow {
    double T, M_tilde, t_star, deviation;
  };
  struct BoundRow {
    double M, t_star, M_tilde, deviation;
  };
  std::vector<HorizonRow> horizons;  // |t*(M_tilde(T)) - T| / T
  std::vector<BoundRow> bounds;      // |M_tilde(t*(M)) - M| / M
  double max_horizon_deviation = 0.0;
  double max_bound_deviation = 0.0;
};

RoundTripReport roundtrip_check(const ProblemSpec& spec,
                                const std::vector<double>& T_values,
                                const std::vector<double>& M_values,
                                const TimeOptOptions& opts = {});

}  // namespace chronotact
