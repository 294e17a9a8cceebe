#include "chronotact/odeflow.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "chronotact/error.hpp"

namespace chronotact {

namespace {

Matrix generator(const ProblemSpec& spec, FlowKind kind, double t) {
  const Matrix a = eval_A(spec, t);
  return kind == FlowKind::kPrimal ? Matrix(-a) : Matrix(a.transpose());
}

Matrix integrate_flow(const ProblemSpec& spec, FlowKind kind, double s, double t,
                      long steps) {
  Matrix x = Matrix::Identity(spec.m, spec.m);
  const double h = (t - s) / static_cast<double>(steps);
  for (long j = 0; j < steps; ++j) {
    const double t0 = s + (t - s) * static_cast<double>(j) / static_cast<double>(steps);
    x = rk4_step(spec, kind, t0, h) * x;
  }
  return x;
}

double relative_gap(const Matrix& coarse, const Matrix& fine) {
  const double scale = std::max(1.0, fine.cwiseAbs().maxCoeff());
  return (coarse - fine).cwiseAbs().maxCoeff() / scale;
}

std::vector<double> uniform_grid(double a, double b, long n) {
  std::vector<double> grid(n + 1);
  for (long j = 0; j <= n; ++j) {
    grid[j] = a + (b - a) * static_cast<double>(j) / static_cast<double>(n);
  }
  grid.back() = b;
  return grid;
}

std::vector<Matrix> backward_flow(const ProblemSpec& spec,
                                  const std::vector<double>& grid) {
  // Steps run forward in tau = T - t, i.e. from grid.back() down to grid[0].
  const auto n = grid.size();
  std::vector<Matrix> psi(n);
  psi[n - 1] = Matrix::Identity(spec.m, spec.m);
  for (std::size_t j = n - 1; j > 0; --j) {
    const double dtau = grid[j] - grid[j - 1];
    psi[j - 1] = rk4_step(spec, FlowKind::kDual, grid[j], -dtau) * psi[j];
  }
  return psi;
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Hermite-corrected trapezoid: exact for cubics on [x0, x1].
double hermite_panel(double x0, double f0, double df0, double x1, double f1,
                     double df1) {
  const double h = x1 - x0;
  return 0.5 * h * (f0 + f1) + h * h / 12.0 * (df0 - df1);
}

}  // namespace

long base_steps(double length) {
  return std::max<long>(2048, static_cast<long>(std::ceil(std::abs(length) * 256.0)));
}

Matrix rk4_step(const ProblemSpec& spec, FlowKind kind, double t, double h) {
  const Matrix g1 = generator(spec, kind, t);
  const Matrix g2 = generator(spec, kind, t + 0.5 * h);
  const Matrix g3 = generator(spec, kind, t + h);
  const Matrix eye = Matrix::Identity(spec.m, spec.m);
  const Matrix k1 = g1;
  const Matrix k2 = g2 * (eye + 0.5 * h * k1);
  const Matrix k3 = g2 * (eye + 0.5 * h * k2);
  const Matrix k4 = g3 * (eye + h * k3);
  return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

TransitionMatrix transition(const ProblemSpec& spec, double s, double t,
                            FlowKind kind, const OdeOptions& opts) {
  if (std::min(s, t) < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "transition times must be >= 0");
  }
  TransitionMatrix out{Matrix::Identity(spec.m, spec.m), s, t, kind};
  if (s == t) return out;

  long steps = base_steps(t - s);
  Matrix coarse = integrate_flow(spec, kind, s, t, steps);
  while (true) {
    if (2 * steps > opts.max_steps) {
      throw Error(ErrorCode::kToleranceNotMet,
                  "transition matrix did not converge within the step cap");
    }
    Matrix fine = integrate_flow(spec, kind, s, t, 2 * steps);
    if (relative_gap(coarse, fine) <= opts.tol) {
      out.value = std::move(fine);
      return out;
    }
    coarse = std::move(fine);
    steps *= 2;
  }
}

DualFlow DualFlow::compute(const ProblemSpec& spec, double T, double t_begin,
                           const OdeOptions& opts) {
  if (!(T > t_begin) || t_begin < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "dual flow needs 0 <= t_begin < T");
  }
  DualFlow flow;
  flow.spec_ = spec;
  flow.T_ = T;

  long steps = base_steps(T - t_begin);
  auto coarse = backward_flow(spec, uniform_grid(t_begin, T, steps));
  while (true) {
    if (2 * steps > opts.max_steps) {
      throw Error(ErrorCode::kToleranceNotMet,
                  "dual flow did not converge within the step cap");
    }
    auto grid = uniform_grid(t_begin, T, 2 * steps);
    auto fine = backward_flow(spec, grid);
    double gap = 0.0;
    for (std::size_t j = 0; j < coarse.size(); ++j) {
      gap = std::max(gap, relative_gap(coarse[j], fine[2 * j]));
    }
    if (gap <= opts.tol) {
      flow.grid_ = std::move(grid);
      flow.psi_ = std::move(fine);
      return flow;
    }
    coarse = std::move(fine);
    steps *= 2;
  }
}

Matrix DualFlow::psi_at(double r, int panel) const {
  const double right = grid_[panel + 1];
  return rk4_step(spec_, FlowKind::kDual, right, r - right) * psi_[panel + 1];
}

DualTrajectory DualFlow::trajectory(const Vector& phi_T) const {
  DualTrajectory traj;
  traj.T = T_;
  traj.phi_T = phi_T;
  traj.grid = grid_;
  const int n = size();
  traj.phi.resize(spec_.m, n);
  for (int j = 0; j < n; ++j) traj.phi.col(j) = psi_[j] * phi_T;
  traj.phi.col(n - 1) = phi_T;
  const Matrix bt = spec_.input_matrix().transpose();
  traj.pairings = bt * traj.phi;
  return traj;
}

DualTrajectory solve_dual(const ProblemSpec& spec, double T, const Vector& phi_T,
                          const OdeOptions& opts) {
  if (!(T > 0.0)) throw Error(ErrorCode::kInvalidArgument, "horizon must be > 0");
  return DualFlow::compute(spec, T, 0.0, opts).trajectory(phi_T);
}

double pairing_at(const ProblemSpec& spec, const DualTrajectory& traj,
                  int channel, int panel, double r) {
  const double right = traj.grid[panel + 1];
  const Vector phi =
      rk4_step(spec, FlowKind::kDual, right, r - right) * traj.phi.col(panel + 1);
  return spec.b[channel].dot(phi);
}

std::vector<SignChange> pairing_sign_changes(const ProblemSpec& spec,
                                             const DualTrajectory& traj,
                                             int channel) {
  std::vector<SignChange> out;
  const int n = traj.size();
  const auto p = traj.pairings.row(channel);
  const double peak = p.cwiseAbs().maxCoeff();
  if (peak == 0.0) return out;
  const double zeta = kPairingZeroRel * peak;
  std::vector<int> s(n);
  for (int j = 0; j < n; ++j) s[j] = std::abs(p[j]) <= zeta ? 0 : sign_of(p[j]);

  const double width = 1e-12 * (traj.grid.back() - traj.grid.front());
  for (int j = 0; j + 1 < n; ++j) {
    if (s[j] * s[j + 1] < 0) {
      double lo = traj.grid[j];
      double hi = traj.grid[j + 1];
      while (hi - lo > width) {
        const double mid = 0.5 * (lo + hi);
        const double pm = pairing_at(spec, traj, channel, j, mid);
        if (pm == 0.0) {
          lo = hi = mid;
          break;
        }
        (sign_of(pm) == s[j] ? lo : hi) = mid;
      }
      out.push_back({0.5 * (lo + hi), j, false});
    } else if (s[j] != 0 && s[j + 1] == 0) {
      // A run of zero samples; a sign change if the run separates opposite signs.
      int c = j + 1;
      while (c < n && s[c] == 0) ++c;
      if (c < n && s[c] == -s[j]) {
        const int node = (j + 1 + c - 1) / 2;
        out.push_back({traj.grid[node], node, true});
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const SignChange& a, const SignChange& b) { return a.t < b.t; });
  return out;
}

double kink_integral(const ProblemSpec& spec, const DualTrajectory& traj,
                     std::span<const double> weights) {
  const int n = traj.size();
  double total = 0.0;
  for (int i = 0; i < spec.d; ++i) {
    if (weights[i] == 0.0) continue;
    // p' = <A(t) b_i, phi(t)> since phi' = A^T phi.
    std::vector<double> dp(n);
    for (int j = 0; j < n; ++j) {
      dp[j] = (eval_A(spec, traj.grid[j]) * spec.b[i]).dot(traj.phi.col(j));
    }
    const auto p = traj.pairings.row(i);
    const auto kinks = pairing_sign_changes(spec, traj, i);
    std::size_t next = 0;
    double sum = 0.0;
    for (int j = 0; j + 1 < n; ++j) {
      double x0 = traj.grid[j];
      double p0 = p[j];
      double dp0 = dp[j];
      while (next < kinks.size() && kinks[next].at_node && kinks[next].panel <= j) {
        ++next;
      }
      while (next < kinks.size() && kinks[next].panel == j && !kinks[next].at_node) {
        const double r = kinks[next].t;
        const double right = traj.grid[j + 1];
        const Vector phi_r = rk4_step(spec, FlowKind::kDual, right, r - right) *
                             traj.phi.col(j + 1);
        const double dpr = (eval_A(spec, r) * spec.b[i]).dot(phi_r);
        const int sigma = sign_of(p0);
        sum += hermite_panel(x0, sigma * p0, sigma * dp0, r, 0.0, sigma * dpr);
        x0 = r;
        p0 = 0.0;
        dp0 = dpr;
        ++next;
      }
      const int sigma = sign_of(p0 + p[j + 1]);
      sum += hermite_panel(x0, sigma * p0, sigma * dp0, traj.grid[j + 1],
                           sigma * p[j + 1], sigma * dp[j + 1]);
    }
    total += weights[i] * sum;
  }
  return total;
}

Trajectory propagate_primal(const ProblemSpec& spec, const Vector& y0,
                            const Control& control, double T,
                            const OdeOptions& opts, double t_begin) {
  if (!(T > t_begin)) {
    throw Error(ErrorCode::kInvalidArgument, "propagation needs T > t_begin");
  }
  const Matrix B = spec.input_matrix();

  // One RK4 step with the control sampled at the three stage times.
  auto step = [&](const Vector& y, double t0, double h, const Vector& u0,
                  const Vector& um, const Vector& u1) {
    const Matrix a0 = eval_A(spec, t0);
    const Matrix am = eval_A(spec, t0 + 0.5 * h);
    const Matrix a1 = eval_A(spec, t0 + h);
    const Vector k1 = -a0 * y + B * u0;
    const Vector k2 = -am * (y + 0.5 * h * k1) + B * um;
    const Vector k3 = -am * (y + 0.5 * h * k2) + B * um;
    const Vector k4 = -a1 * (y + h * k3) + B * u1;
    return Vector(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  };

  auto finish = [](Trajectory traj) {
    traj.terminal_norm = traj.terminal().norm();
    return traj;
  };

  if (const auto* sampled = std::get_if<SampledControl>(&control)) {
    const long n = sampled->samples.cols();
    const bool aligned = n >= 3 && (n - 1) % 2 == 0 &&
                         sampled->t_begin == t_begin && sampled->t_end == T;
    const long steps = aligned ? (n - 1) / 2 : base_steps(T - t_begin);
    Trajectory traj;
    traj.grid = uniform_grid(t_begin, T, steps);
    traj.y.resize(spec.m, steps + 1);
    traj.y.col(0) = y0;
    Vector y = y0;
    for (long j = 0; j < steps; ++j) {
      const double t0 = traj.grid[j];
      const double h = traj.grid[j + 1] - t0;
      Vector u0, um, u1;
      if (aligned) {
        u0 = sampled->samples.col(2 * j);
        um = sampled->samples.col(2 * j + 1);
        u1 = sampled->samples.col(2 * j + 2);
      } else {
        u0 = sampled->value(t0);
        um = sampled->value(t0 + 0.5 * h);
        u1 = sampled->value(t0 + h);
      }
      y = step(y, t0, h, u0, um, u1);
      traj.y.col(j + 1) = y;
    }
    return finish(std::move(traj));
  }

  const auto& bang = std::get<BangBangControl>(control);
  std::vector<double> switches;
  for (double s : bang.breakpoints()) {
    if (s > t_begin && s < T) switches.push_back(s);
  }

  auto run = [&](long steps) {
    std::vector<double> nodes = uniform_grid(t_begin, T, steps);
    nodes.insert(nodes.end(), switches.begin(), switches.end());
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    Trajectory traj;
    traj.y.resize(spec.m, static_cast<Eigen::Index>(nodes.size()));
    traj.y.col(0) = y0;
    Vector y = y0;
    for (std::size_t j = 0; j + 1 < nodes.size(); ++j) {
      const double h = nodes[j + 1] - nodes[j];
      // Constant on the interval: switch times are nodes.
      const Vector u = bang.value(nodes[j] + 0.5 * h);
      y = step(y, nodes[j], h, u, u, u);
      traj.y.col(static_cast<Eigen::Index>(j + 1)) = y;
    }
    traj.grid = std::move(nodes);
    return traj;
  };

  long steps = base_steps(T - t_begin);
  Trajectory coarse = run(steps);
  while (true) {
    if (2 * steps > opts.max_steps) {
      throw Error(ErrorCode::kToleranceNotMet,
                  "primal propagation did not converge within the step cap");
    }
    Trajectory fine = run(2 * steps);
    const Vector a = coarse.terminal();
    const Vector b = fine.terminal();
    const double scale = std::max({1.0, b.cwiseAbs().maxCoeff(), y0.cwiseAbs().maxCoeff()});
    if ((a - b).cwiseAbs().maxCoeff() / scale <= opts.tol) {
      return finish(std::move(fine));
    }
    coarse = std::move(fine);
    steps *= 2;
  }
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t";
  for (Eigen::Index i = 0; i < traj.y.rows(); ++i) out << ",y" << (i + 1);
  out << "\n" << std::setprecision(17);
  for (std::size_t j = 0; j < traj.grid.size(); ++j) {
    out << traj.grid[j];
    for (Eigen::Index i = 0; i < traj.y.rows(); ++i) {
      out << "," << traj.y(i, static_cast<Eigen::Index>(j));
    }
    out << "\n";
  }
}

}  // namespace chronotact
