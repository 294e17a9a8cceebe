#include "chronotact/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace chronotact {

namespace {

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

int count_sign_changes(const std::vector<double>& values, double zeta) {
  int last = 0;
  int count = 0;
  for (double v : values) {
    const int s = std::abs(v) <= zeta ? 0 : sign_of(v);
    if (s == 0) continue;
    if (last != 0 && s != last) ++count;
    last = s;
  }
  return count;
}

}  // namespace

double default_tol_terminal(const ProblemSpec& spec) {
  return 1e-6 * (1.0 + spec.y0.norm());
}

SwitchingStructure extract_switchings(const ProblemSpec& spec,
                                      const DualTrajectory& traj, int channel) {
  const auto p = traj.pairings.row(channel);
  const double peak = p.cwiseAbs().maxCoeff();
  if (peak < 1e-14) {
    throw Error(ErrorCode::kDegeneratePairing,
                "pairing of channel " + std::to_string(channel) +
                    " vanishes at every sample");
  }
  const double zeta = kPairingZeroRel * peak;

  SwitchingStructure out;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (std::abs(p[j]) > zeta) {
      out.initial_sign = sign_of(p[j]);
      break;
    }
  }
  const double t0 = traj.grid.front();
  const double t1 = traj.grid.back();
  for (const auto& change : pairing_sign_changes(spec, traj, channel)) {
    if (change.t > t0 && change.t < t1) out.switch_times.push_back(change.t);
  }

  // Recount on the grid refined by panel midpoints.
  std::vector<double> refined;
  refined.reserve(2 * traj.grid.size());
  for (int j = 0; j + 1 < traj.size(); ++j) {
    refined.push_back(p[j]);
    refined.push_back(
        pairing_at(spec, traj, channel, j, 0.5 * (traj.grid[j] + traj.grid[j + 1])));
  }
  refined.push_back(p[p.size() - 1]);
  out.count_stable = count_sign_changes(refined, zeta) ==
                     static_cast<int>(out.switch_times.size());
  return out;
}

NormOptResult synthesize_norm_optimal(const DualFunctional& functional,
                                      const SynthesisOptions& opts) {
  const auto& spec = functional.spec();
  const double T = functional.T();
  NormOptResult out;
  out.minimizer = minimize_JT(functional, opts.minimize);
  out.M_tilde = out.minimizer.dual_norm_value;

  const DualTrajectory traj = functional.flow().trajectory(out.minimizer.phi_hat_T);
  out.control.T = T;
  out.control.provenance = Provenance::kNormOptimal;
  for (int i = 0; i < spec.d; ++i) {
    const auto sw = extract_switchings(spec, traj, i);
    out.control.channels.push_back({spec.k[i] * out.M_tilde, sw.initial_sign,
                                    sw.switch_times});
    if (!sw.count_stable) {
      out.warnings.push_back("SWITCH_COUNT_UNSTABLE: channel " + std::to_string(i) +
                             " sign changes differ on the refined grid");
    }
    // Normality: the sign is ill-defined where the pairing hugs zero.
    const auto p = traj.pairings.row(i);
    const double zeta = 1e-9 * p.cwiseAbs().maxCoeff();
    int run_start = -1;
    for (int j = 0; j <= traj.size(); ++j) {
      const bool small = j < traj.size() && std::abs(p[j]) <= zeta;
      if (small && run_start < 0) run_start = j;
      if (!small && run_start >= 0) {
        const double width = traj.grid[j - 1] - traj.grid[run_start];
        if (width > 1e-3 * T) {
          out.warnings.push_back("NORMALITY: channel " + std::to_string(i) +
                                 " pairing is numerically zero on an interval");
          break;
        }
        run_start = -1;
      }
    }
  }

  if (opts.check_terminal) {
    const auto traj_y =
        propagate_primal(spec, spec.y0, out.control, T, opts.minimize.ode);
    out.terminal_residual = traj_y.terminal_norm;
    const double tol =
        opts.tol_terminal > 0.0 ? opts.tol_terminal : default_tol_terminal(spec);
    if (out.terminal_residual > tol) {
      std::ostringstream msg;
      msg << "synthesized control leaves |y(T)| = " << out.terminal_residual
          << " > " << tol << " at T = " << T;
      throw Error(ErrorCode::kNumerical, msg.str());
    }
  }
  return out;
}

NormOptResult synthesize_norm_optimal(const ProblemSpec& spec, double T,
                                      const SynthesisOptions& opts) {
  if (!(T > 0.0)) throw Error(ErrorCode::kInvalidArgument, "horizon must be > 0");
  const auto report = validate_spec(spec);
  if (!report.ok) {
    throw Error(ErrorCode::kInvalidArgument,
                "problem fails validation: " + report.violations.front().message);
  }
  return synthesize_norm_optimal(DualFunctional(spec, T, opts.minimize.ode), opts);
}

std::vector<CurvePoint> mtilde_curve(const ProblemSpec& spec,
                                     const std::vector<double>& T_values,
                                     const SynthesisOptions& opts,
                                     unsigned threads) {
  for (std::size_t j = 0; j < T_values.size(); ++j) {
    if (!(T_values[j] > 0.0) || (j > 0 && !(T_values[j] > T_values[j - 1]))) {
      throw Error(ErrorCode::kInvalidArgument,
                  "curve horizons must be positive and increasing");
    }
  }
  std::vector<CurvePoint> out(T_values.size());
  auto evaluate = [&](std::size_t j) {
    out[j] = {T_values[j], synthesize_norm_optimal(spec, T_values[j], opts).M_tilde};
  };
  if (threads <= 1) {
    for (std::size_t j = 0; j < T_values.size(); ++j) evaluate(j);
  } else {
    for (std::size_t begin = 0; begin < T_values.size(); begin += threads) {
      std::vector<std::future<void>> batch;
      const std::size_t end = std::min(T_values.size(), begin + threads);
      for (std::size_t j = begin; j < end; ++j) {
        batch.push_back(std::async(std::launch::async, evaluate, j));
      }
      for (auto& f : batch) f.get();
    }
  }

  for (std::size_t j = 1; j < out.size(); ++j) {
    if (!(out[j].M_tilde < out[j - 1].M_tilde)) {
      std::ostringstream msg;
      msg << std::setprecision(17) << "M_tilde(" << out[j - 1].T
          << ") = " << out[j - 1].M_tilde << " is not above M_tilde(" << out[j].T
          << ") = " << out[j].M_tilde;
      throw Error(ErrorCode::kMonotonicity, msg.str());
    }
  }
  return out;
}

void write_control_csv(std::ostream& out, const BangBangControl& control,
                       int samples) {
  std::vector<double> grid;
  for (int j = 0; j <= samples; ++j) {
    grid.push_back(control.T * static_cast<double>(j) / samples);
  }
  grid.back() = control.T;
  const auto switches = control.breakpoints();
  grid.insert(grid.end(), switches.begin(), switches.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  out << "t";
  for (int i = 0; i < control.d(); ++i) out << ",u" << (i + 1);
  out << "\n" << std::setprecision(17);
  for (double t : grid) {
    out << t;
    for (int i = 0; i < control.d(); ++i) out << "," << control.value(i, t);
    out << "\n";
  }
}

void write_control_csv(std::ostream& out, const SampledControl& control) {
  out << "t";
  for (int i = 0; i < control.d(); ++i) out << ",u" << (i + 1);
  out << "\n" << std::setprecision(17);
  const auto n = control.samples.cols();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double t = n == 1 ? control.t_begin
                            : control.t_begin + (control.t_end - control.t_begin) *
                                                    static_cast<double>(j) /
                                                    static_cast<double>(n - 1);
    out << t;
    for (int i = 0; i < control.d(); ++i) out << "," << control.samples(i, j);
    out << "\n";
  }
}

}  // namespace chronotact
