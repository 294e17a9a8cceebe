#include "chronotact/dualopt.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace chronotact {

namespace {

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

constexpr std::array<double, 4> kSmoothingSchedule{1e-2, 1e-4, 1e-6, 1e-8};

}  // namespace

DualFunctional::DualFunctional(const ProblemSpec& spec, double T,
                               const OdeOptions& opts)
    : flow_(DualFlow::compute(spec, T, 0.0, opts)) {
  c_ = flow_.psi_begin().transpose() * spec.y0;
  const int n = flow_.size();
  g_.assign(spec.d, Matrix(spec.m, n));
  dg_.assign(spec.d, Matrix(spec.m, n));
  for (int j = 0; j < n; ++j) {
    const Matrix psi_t = flow_.psi(j).transpose();
    const Matrix a = eval_A(spec, flow_.grid()[j]);
    for (int i = 0; i < spec.d; ++i) {
      g_[i].col(j) = psi_t * spec.b[i];
      dg_[i].col(j) = psi_t * (a * spec.b[i]);
    }
  }
}

DualFunctional::Derivatives DualFunctional::derivatives(const Vector& phi_T,
                                                        bool with_hessian) const {
  const auto& spec = flow_.spec();
  const auto& grid = flow_.grid();
  const int n = flow_.size();
  Derivatives out;
  out.norm_grad = Vector::Zero(spec.m);
  out.norm_hessian = Matrix::Zero(spec.m, spec.m);

  const DualTrajectory traj = flow_.trajectory(phi_T);
  for (int i = 0; i < spec.d; ++i) {
    const double k = spec.k[i];
    const Vector p = g_[i].transpose() * phi_T;
    const Vector dp = dg_[i].transpose() * phi_T;
    const auto kinks = pairing_sign_changes(spec, traj, i);

    double sum = 0.0;
    Vector gsum = Vector::Zero(spec.m);
    // Adds the Hermite-corrected panel [x0, x1] of sigma * (p, g).
    auto add_panel = [&](int sigma, double x0, double p0, double dp0,
                         const Vector& g0, const Vector& dg0, double x1, double p1,
                         double dp1, const Vector& g1, const Vector& dg1) {
      const double h = x1 - x0;
      const double c2 = h * h / 12.0;
      sum += sigma * (0.5 * h * (p0 + p1) + c2 * (dp0 - dp1));
      gsum += sigma * (0.5 * h * (g0 + g1) + c2 * (dg0 - dg1));
    };
    auto add_root = [&](const Vector& g, double slope) {
      const double s = std::max(std::abs(slope), 1e-300);
      out.norm_hessian += (2.0 * k / s) * (g * g.transpose());
    };

    std::size_t next = 0;
    for (int j = 0; j + 1 < n; ++j) {
      double x0 = grid[j];
      double p0 = p[j];
      double dp0 = dp[j];
      Vector g0 = g_[i].col(j);
      Vector dg0 = dg_[i].col(j);
      while (next < kinks.size() && kinks[next].at_node && kinks[next].panel <= j) {
        if (with_hessian) {
          const int node = kinks[next].panel;
          add_root(g_[i].col(node), dp[node]);
        }
        ++next;
      }
      while (next < kinks.size() && kinks[next].panel == j && !kinks[next].at_node) {
        const double r = kinks[next].t;
        const Matrix psi_r = flow_.psi_at(r, j);
        const Vector gr = psi_r.transpose() * spec.b[i];
        const Vector dgr = psi_r.transpose() * (eval_A(spec, r) * spec.b[i]);
        const double dpr = dgr.dot(phi_T);
        add_panel(sign_of(p0), x0, p0, dp0, g0, dg0, r, 0.0, dpr, gr, dgr);
        if (with_hessian) add_root(gr, dpr);
        x0 = r;
        p0 = 0.0;
        dp0 = dpr;
        g0 = gr;
        dg0 = dgr;
        ++next;
      }
      add_panel(sign_of(p0 + p[j + 1]), x0, p0, dp0, g0, dg0, grid[j + 1],
                p[j + 1], dp[j + 1], g_[i].col(j + 1), dg_[i].col(j + 1));
    }
    while (next < kinks.size()) {
      if (with_hessian && kinks[next].at_node) {
        add_root(g_[i].col(kinks[next].panel), dp[kinks[next].panel]);
      }
      ++next;
    }
    out.norm += k * sum;
    out.norm_grad += k * gsum;
  }
  out.value = 0.5 * out.norm * out.norm + c_.dot(phi_T);
  out.grad = out.norm * out.norm_grad + c_;
  return out;
}

double DualFunctional::norm(const Vector& phi_T) const {
  return derivatives(phi_T, false).norm;
}

double DualFunctional::value(const Vector& phi_T) const {
  return derivatives(phi_T, false).value;
}

double DualFunctional::el_residual(const Vector& phi_T) const {
  return derivatives(phi_T, false).grad.cwiseAbs().maxCoeff();
}

DualFunctional::Smoothed DualFunctional::smoothed(const Vector& phi_T,
                                                  double eps) const {
  const auto& spec = flow_.spec();
  const auto& grid = flow_.grid();
  const int n = flow_.size();
  const double e2 = eps * eps;
  double norm = 0.0;
  Vector norm_grad = Vector::Zero(spec.m);
  for (int i = 0; i < spec.d; ++i) {
    const Vector p = g_[i].transpose() * phi_T;
    const Vector dp = dg_[i].transpose() * phi_T;
    // Node values f = sqrt(p^2 + eps^2), f' = p p' / f and their gradients.
    Vector f(n), df(n);
    Matrix grad_f(spec.m, n), grad_df(spec.m, n);
    for (int j = 0; j < n; ++j) {
      f[j] = std::sqrt(p[j] * p[j] + e2);
      df[j] = p[j] * dp[j] / f[j];
      grad_f.col(j) = (p[j] / f[j]) * g_[i].col(j);
      grad_df.col(j) =
          (p[j] * dg_[i].col(j) + (dp[j] * e2 / (f[j] * f[j])) * g_[i].col(j)) / f[j];
    }
    double sum = 0.0;
    Vector gsum = Vector::Zero(spec.m);
    for (int j = 0; j + 1 < n; ++j) {
      const double h = grid[j + 1] - grid[j];
      const double c2 = h * h / 12.0;
      sum += 0.5 * h * (f[j] + f[j + 1]) + c2 * (df[j] - df[j + 1]);
      gsum += 0.5 * h * (grad_f.col(j) + grad_f.col(j + 1)) +
              c2 * (grad_df.col(j) - grad_df.col(j + 1));
    }
    norm += spec.k[i] * sum;
    norm_grad += spec.k[i] * gsum;
  }
  return {0.5 * norm * norm + c_.dot(phi_T), norm * norm_grad + c_};
}

double dual_norm(const ProblemSpec& spec, double T, const Vector& phi_T,
                 const OdeOptions& opts) {
  if (phi_T.isZero(0.0)) return 0.0;
  return kink_integral(spec, solve_dual(spec, T, phi_T, opts), spec.k);
}

double eval_JT(const ProblemSpec& spec, double T, const Vector& phi_T,
               const OdeOptions& opts) {
  const auto traj = solve_dual(spec, T, phi_T, opts);
  const double norm = kink_integral(spec, traj, spec.k);
  return 0.5 * norm * norm + traj.phi.col(0).dot(spec.y0);
}

double el_residual(const ProblemSpec& spec, double T, const Vector& phi_hat_T,
                   const OdeOptions& opts) {
  const DualFunctional functional(spec, T, opts);
  if (!(functional.norm(phi_hat_T) > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "Euler-Lagrange residual needs a point with nonzero dual norm");
  }
  return functional.el_residual(phi_hat_T);
}

double default_tol_el(const ProblemSpec& spec) {
  return 1e-8 * (1.0 + spec.y0.norm());
}

namespace {

Vector initial_point(const DualFunctional& functional, const MinimizeOptions& opts) {
  if (opts.initial_point) return *opts.initial_point;
  const auto& spec = functional.spec();

  // Warm start: the optimum along its ray, J(s w) minimized at s = -c.w / |w|_*^2.
  if (opts.warm_start) {
    const Vector& w = *opts.warm_start;
    const double nw = functional.norm(w);
    const double cw = functional.linear_term().dot(w);
    if (nw > 0.0 && cw < 0.0) return (-cw / (nw * nw)) * w;
  }

  // phi_T = -alpha Psi(T,0) y0 makes J negative for small alpha.
  const Vector v = functional.flow().psi_begin().partialPivLu().solve(spec.y0);
  Vector best = -1e-6 * v;
  double best_value = functional.value(best);
  for (int e = -5; e <= 2; ++e) {
    const Vector candidate = -std::pow(10.0, e) * v;
    const double value = functional.value(candidate);
    if (value < best_value) {
      best = candidate;
      best_value = value;
    }
  }
  // Exact minimizer along the ray: J(-a v) = a^2 |v|_*^2 / 2 - a |y0|^2.
  const double nv = functional.norm(v);
  if (nv > 0.0) {
    const Vector ray = -(spec.y0.squaredNorm() / (nv * nv)) * v;
    const double value = functional.value(ray);
    if (value < best_value) {
      best = ray;
      best_value = value;
    }
  }
  return best;
}

// Quasi-Newton continuation on the smoothed functional.
Vector smoothing_stage(const DualFunctional& functional, Vector phi, double tol,
                       double* eps_final, int* iterations) {
  const int m = functional.spec().m;
  const double scale = functional.norm(phi) / functional.T();
  if (!(scale > 0.0)) return phi;
  for (double level : kSmoothingSchedule) {
    const double eps = level * scale;
    *eps_final = eps;
    for (int it = 0; it < 25; ++it) {
      ++*iterations;
      const auto s = functional.smoothed(phi, eps);
      if (s.grad.cwiseAbs().maxCoeff() <= tol) break;
      Vector dir = -s.grad;
      if (m <= 8) {
        Matrix hess(m, m);
        const double delta = 1e-6 * std::max(phi.norm(), 1e-12);
        for (int k = 0; k < m; ++k) {
          Vector e = Vector::Zero(m);
          e[k] = delta;
          hess.col(k) = (functional.smoothed(phi + e, eps).grad -
                         functional.smoothed(phi - e, eps).grad) /
                        (2.0 * delta);
        }
        hess = 0.5 * (hess + hess.transpose()).eval();
        const double mu = 1e-10 * std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1e-300);
        const Vector newton =
            (hess + mu * Matrix::Identity(m, m)).ldlt().solve(-s.grad);
        if (newton.allFinite() && newton.dot(s.grad) < 0.0) dir = newton;
      }
      const double slope = s.grad.dot(dir);
      double step = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 50; ++ls) {
        const Vector trial = phi + step * dir;
        if (functional.smoothed(trial, eps).value <= s.value + 1e-4 * step * slope) {
          phi = trial;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
    }
  }
  return phi;
}

struct NewtonOutcome {
  Vector phi;
  double residual = 0.0;
};

// Semismooth Newton on the exact functional; J is C^1 away from degenerate
// pairings and its generalized Hessian comes from the pairing roots.
NewtonOutcome newton_stage(const DualFunctional& functional, Vector phi, double tol,
                           int max_iterations, int* iterations) {
  const int m = functional.spec().m;
  auto current = functional.derivatives(phi);
  double residual = current.grad.cwiseAbs().maxCoeff();
  NewtonOutcome best{phi, residual};
  int polish = 0;
  for (int it = 0; it < max_iterations; ++it) {
    if (residual <= tol) {
      if (residual <= 1e-3 * tol || polish >= 4) break;
      ++polish;
    }
    ++*iterations;
    const Matrix hess = current.norm_grad * current.norm_grad.transpose() +
                        current.norm * current.norm_hessian;
    double mu = 1e-12 * std::max(hess.trace(), 1e-300);
    bool accepted = false;
    for (int attempt = 0; attempt < 8 && !accepted; ++attempt, mu *= 100.0) {
      Vector dir = (hess + mu * Matrix::Identity(m, m)).ldlt().solve(-current.grad);
      if (!dir.allFinite() || dir.dot(current.grad) >= 0.0) dir = -current.grad;
      const double slope = current.grad.dot(dir);
      double step = 1.0;
      for (int ls = 0; ls < 40; ++ls) {
        const Vector trial = phi + step * dir;
        auto next = functional.derivatives(trial);
        const double next_residual = next.grad.cwiseAbs().maxCoeff();
        const bool armijo = next.value <= current.value + 1e-4 * step * slope;
        const bool flat = next_residual < residual &&
                          next.value <= current.value + 1e-13 * std::abs(current.value);
        if (armijo || flat) {
          phi = trial;
          current = std::move(next);
          residual = next_residual;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
    }
    if (residual < best.residual) best = {phi, residual};
    if (!accepted) break;
  }
  return best;
}

}  // namespace

MinimizerResult minimize_JT(const DualFunctional& functional,
                            const MinimizeOptions& opts) {
  const auto& spec = functional.spec();
  const double tol = opts.tol_el > 0.0 ? opts.tol_el : default_tol_el(spec);

  MinimizerResult result;
  Vector phi = initial_point(functional, opts);
  const bool smoothing = opts.smoothing && !opts.initial_point;
  NewtonOutcome newton{phi, std::numeric_limits<double>::infinity()};
  // A warm start from a nearby horizon is usually inside the region where
  // exact Newton converges; the smoothing continuation is the fallback.
  if (!smoothing || opts.warm_start) {
    newton = newton_stage(functional, phi, tol, opts.max_iterations, &result.iterations);
  }
  if (smoothing && !(newton.residual <= tol)) {
    const Vector smoothed = smoothing_stage(functional, phi, tol, &result.epsilon_final,
                                            &result.iterations);
    if (smoothed.allFinite() && functional.value(smoothed) <= functional.value(phi)) {
      phi = smoothed;
    }
    const auto retry =
        newton_stage(functional, phi, tol, opts.max_iterations, &result.iterations);
    if (!(retry.residual >= newton.residual)) newton = retry;
  }
  const Vector& best_phi = newton.phi;

  result.phi_hat_T = best_phi;
  const auto final = functional.derivatives(best_phi, false);
  result.J_value = final.value;
  result.dual_norm_value = final.norm;
  result.el_residual = final.grad.cwiseAbs().maxCoeff();
  result.converged = result.el_residual <= tol;

  if (result.dual_norm_value < 1e-14) {
    throw Error(ErrorCode::kDegenerateDual,
                "minimizer has vanishing dual norm; the pairings are numerically "
                "zero (Conti's condition likely fails)");
  }
  if (!result.converged && opts.throw_on_stall) {
    throw MinimizerStalled(result, "Euler-Lagrange residual " +
                                       std::to_string(result.el_residual) +
                                       " stalled above " + std::to_string(tol));
  }
  return result;
}

MinimizerResult minimize_JT(const ProblemSpec& spec, double T,
                            const MinimizeOptions& opts) {
  if (!(T > 0.0)) throw Error(ErrorCode::kInvalidArgument, "horizon must be > 0");
  const auto report = validate_spec(spec);
  if (!report.ok) {
    throw Error(ErrorCode::kInvalidArgument,
                "problem fails validation: " + report.violations.front().message);
  }
  return minimize_JT(DualFunctional(spec, T, opts.ode), opts);
}

}  // namespace chronotact
