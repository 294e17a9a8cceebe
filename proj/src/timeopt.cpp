#include "chronotact/timeopt.hpp"

#include <cmath>
#include <sstream>

namespace chronotact {

namespace {

struct Evaluation {
  double M_tilde = 0.0;
  Vector phi_hat;
};

Evaluation evaluate_norm(const ProblemSpec& spec, double T,
                         const MinimizeOptions& base,
                         const std::optional<Vector>& warm) {
  MinimizeOptions opts = base;
  if (warm) opts.warm_start = warm;
  const auto r = minimize_JT(DualFunctional(spec, T, opts.ode), opts);
  return {r.dual_norm_value, r.phi_hat_T};
}

void require_valid(const ProblemSpec& spec, double M) {
  if (!(M > 0.0)) throw Error(ErrorCode::kInvalidArgument, "bound M must be > 0");
  const auto report = validate_spec(spec);
  if (!report.ok) {
    throw Error(ErrorCode::kInvalidArgument,
                "problem fails validation: " + report.violations.front().message);
  }
}

}  // namespace

int find_horizon_K(const ProblemSpec& spec, double M, double t0, int K_max,
                   const MinimizeOptions& opts) {
  require_valid(spec, M);
  if (!(t0 > 0.0) || K_max < 1) {
    throw Error(ErrorCode::kInvalidArgument, "need t0 > 0 and K_max >= 1");
  }
  std::optional<Vector> warm;
  for (int k = 1; k <= K_max; ++k) {
    const auto e = evaluate_norm(spec, k * t0, opts, warm);
    if (e.M_tilde < M) return k;
    warm = e.phi_hat;
  }
  std::ostringstream msg;
  msg << "no k <= " << K_max << " with M_tilde(k t0) < " << M
      << "; M_tilde(T) -> 0 as T -> infinity, so M is too small for this cap "
         "or Conti's condition fails";
  throw Error(ErrorCode::kHorizonExhausted, msg.str());
}

TimeOptResult bisect_optimal_time(const ProblemSpec& spec, double M,
                                  const TimeOptOptions& opts) {
  require_valid(spec, M);
  const double tol_T = opts.tol_T > 0.0 ? opts.tol_T : 1e-9 * std::max(1.0, opts.t0);
  const double tol_M = opts.tol_M > 0.0 ? opts.tol_M : 1e-9 * M;

  TimeOptResult out;
  out.M = M;
  out.trace.t0 = opts.t0;
  out.trace.K = find_horizon_K(spec, M, opts.t0, opts.K_max, opts.synthesis.minimize);

  // a_0 = 0 is a formal endpoint only: M_tilde(0+) = +infinity.
  double a = 0.0;
  double b = out.trace.K * opts.t0;
  std::optional<Vector> warm;
  SynthesisOptions sopts = opts.synthesis;
  sopts.check_terminal = false;
  NormOptResult last;
  for (int n = 1; n <= opts.n_max; ++n) {
    const double t = 0.5 * (a + b);
    if (warm) sopts.minimize.warm_start = warm;
    last = synthesize_norm_optimal(DualFunctional(spec, t, sopts.minimize.ode), sopts);
    warm = last.minimizer.phi_hat_T;
    if (last.M_tilde > M) {
      a = t;
    } else {
      b = t;
    }
    out.trace.entries.push_back({n, t, last.M_tilde, a, b, last.control});
    if ((opts.early_exit && std::abs(last.M_tilde - M) <= tol_M) || b - a <= tol_T) {
      out.trace.converged = true;
      break;
    }
  }
  if (!out.trace.converged) {
    throw Error(ErrorCode::kMaxIterations,
                "bisection did not reach the bracket tolerance within n_max steps");
  }

  const auto& final_entry = out.trace.entries.back();
  out.t_star = final_entry.t;
  out.M_check = final_entry.M_tilde;
  out.el_residual = last.minimizer.el_residual;
  // Equivalence: the norm-optimal control at t* is time optimal for M.
  out.control = final_entry.control;
  out.control.provenance = Provenance::kTimeOptimal;
  for (int i = 0; i < spec.d; ++i) out.control.channels[i].level = spec.k[i] * M;
  return out;
}

TimeOptResult solve_time_optimal(const ProblemSpec& spec, double M,
                                 const TimeOptOptions& opts) {
  auto result = bisect_optimal_time(spec, M, opts);
  result.verification =
      check_time_optimality(spec, M, result.t_star, result.control, opts.verify);
  if (opts.throw_on_reject && !result.verification->accept) {
    std::ostringstream msg;
    msg << "time-optimal result at t* = " << result.t_star << " rejected:";
    for (const auto& note : result.verification->notes) msg << " " << note << ";";
    throw Error(ErrorCode::kVerificationFailed, msg.str());
  }
  return result;
}

RoundTripReport roundtrip_check(const ProblemSpec& spec,
                                const std::vector<double>& T_values,
                                const std::vector<double>& M_values,
                                const TimeOptOptions& opts) {
  RoundTripReport report;
  for (double T : T_values) {
    if (!(T > 0.0)) throw Error(ErrorCode::kInvalidArgument, "horizons must be > 0");
    const double m_tilde = evaluate_norm(spec, T, opts.synthesis.minimize, {}).M_tilde;
    const double t_star = bisect_optimal_time(spec, m_tilde, opts).t_star;
    const double dev = std::abs(t_star - T) / T;
    report.horizons.push_back({T, m_tilde, t_star, dev});
    report.max_horizon_deviation = std::max(report.max_horizon_deviation, dev);
  }
  for (double M : M_values) {
    const double t_star = bisect_optimal_time(spec, M, opts).t_star;
    const double m_tilde = evaluate_norm(spec, t_star, opts.synthesis.minimize, {}).M_tilde;
    const double dev = std::abs(m_tilde - M) / M;
    report.bounds.push_back({M, t_star, m_tilde, dev});
    report.max_bound_deviation = std::max(report.max_bound_deviation, dev);
  }
  return report;
}

}  // namespace chronotact
