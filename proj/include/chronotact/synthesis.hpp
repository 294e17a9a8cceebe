#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "chronotact/dualopt.hpp"

namespace chronotact {

struct SwitchingStructure {
  int initial_sign = 1;
  std::vector<double> switch_times;
  // False when the sign-change count differs on the grid refined by panel
  // midpoints, i.e. the sample grid may be too coarse to resolve the switches.
  bool count_stable = true;
};

struct NormOptResult {
  double M_tilde = 0.0;
  BangBangControl control;
  MinimizerResult minimizer;
  double terminal_residual = 0.0;
  std::vector<std::string> warnings;
};

struct SynthesisOptions {
  MinimizeOptions minimize;
  // Negative selects 1e-6 * (1 + |y0|).
  double tol_terminal = -1.0;
  // Propagation check of the synthesized control; curve sampling may skip it.
  bool check_terminal = true;
};

double default_tol_terminal(const ProblemSpec& spec);

SwitchingStructure extract_switchings(const ProblemSpec& spec,
                                      const DualTrajectory& traj, int channel);

/// Norm-optimal control for horizon T from a minimizer of J^T: channel i takes
/// k_i * |phi_hat|_* times the sign of <b_i, phi_hat(t)>.
NormOptResult synthesize_norm_optimal(const ProblemSpec& spec, double T,
                                      const SynthesisOptions& opts = {});
NormOptResult synthesize_norm_optimal(const DualFunctional& functional,
                                      const SynthesisOptions& opts = {});

struct CurvePoint {
  double T = 0.0;
  double M_tilde = 0.0;
};

/// M_tilde(T) over increasing horizons, evaluated on up to `threads` worker
/// threads (0 = sequential). Throws MonotonicityError unless strictly decreasing.
std::vector<CurvePoint> mtilde_curve(const ProblemSpec& spec,
                                     const std::vector<double>& T_values,
                                     const SynthesisOptions& opts = {},
                                     unsigned threads = 0);

/// CSV with header t,u1,...,ud on a uniform grid of `samples` intervals with
/// every switch time inserted.
void write_control_csv(std::ostream& out, const BangBangControl& control,
                       int samples = 2048);
void write_control_csv(std::ostream& out, const SampledControl& control);

}  // namespace chronotact
