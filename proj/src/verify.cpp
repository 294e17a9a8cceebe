#include "chronotact/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chronotact {

namespace {

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// int_0^T sum_i u^i(t) g_i(t) dt + Psi(0,T)^T y0 with g_i = Psi(t,T)^T b_i;
// component j is the duality identity for the terminal datum e_j.
Vector duality_identity(const ProblemSpec& spec, const BangBangControl& control,
                        double T, const Vector& y0, const OdeOptions& opts) {
  const auto flow = DualFlow::compute(spec, T, 0.0, opts);
  const auto& grid = flow.grid();
  std::vector<double> cuts;
  for (double s : control.breakpoints()) {
    if (s > 0.0 && s < T) cuts.push_back(s);
  }
  if (control.T > 0.0 && control.T < T) cuts.push_back(control.T);
  std::sort(cuts.begin(), cuts.end());

  Vector total = flow.psi_begin().transpose() * y0;
  std::size_t next = 0;
  for (int j = 0; j + 1 < flow.size(); ++j) {
    std::vector<double> nodes{grid[j]};
    while (next < cuts.size() && cuts[next] < grid[j + 1]) {
      if (cuts[next] > grid[j]) nodes.push_back(cuts[next]);
      ++next;
    }
    nodes.push_back(grid[j + 1]);
    for (std::size_t q = 0; q + 1 < nodes.size(); ++q) {
      const double x0 = nodes[q];
      const double x1 = nodes[q + 1];
      const Vector u = control.value(0.5 * (x0 + x1));
      const Matrix psi0 = q == 0 ? flow.psi(j) : flow.psi_at(x0, j);
      const Matrix psi1 = q + 2 == nodes.size() ? flow.psi(j + 1) : flow.psi_at(x1, j);
      Vector bu = spec.input_matrix() * u;
      const Vector g0 = psi0.transpose() * bu;
      const Vector g1 = psi1.transpose() * bu;
      const Vector dg0 = psi0.transpose() * (eval_A(spec, x0) * bu);
      const Vector dg1 = psi1.transpose() * (eval_A(spec, x1) * bu);
      const double h = x1 - x0;
      total += 0.5 * h * (g0 + g1) + h * h / 12.0 * (dg0 - dg1);
    }
  }
  return total;
}

}  // namespace

TerminalCheck terminal_residual(const ProblemSpec& spec, const Control& control,
                                double T, const Vector& y0, const OdeOptions& opts) {
  TerminalCheck out;
  out.propagated = propagate_primal(spec, y0, control, T, opts).terminal_norm;
  if (const auto* bang = std::get_if<BangBangControl>(&control)) {
    out.duality = duality_identity(spec, *bang, T, y0, opts).cwiseAbs().maxCoeff();
  }
  out.value = std::max(out.propagated, out.duality);
  return out;
}

bool check_bangbang(const BangBangControl& control, double M,
                    const ProblemSpec& spec) {
  if (control.d() != spec.d) return false;
  for (int i = 0; i < spec.d; ++i) {
    const double target = spec.k[i] * M;
    if (std::abs(control.channels[i].level - target) > 1e-9 * target) return false;
  }
  return true;
}

OptimalityReport check_time_optimality(const ProblemSpec& spec, double M,
                                       double t_star,
                                       const BangBangControl& control,
                                       const VerifyOptions& opts) {
  if (!(t_star > 0.0) || !(M > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "verification needs M > 0 and t_star > 0");
  }
  OptimalityReport report;
  const DualFunctional functional(spec, t_star, opts.minimize.ode);
  MinimizeOptions mopts = opts.minimize;
  mopts.throw_on_stall = false;
  const auto minimizer = minimize_JT(functional, mopts);
  report.el_residual = minimizer.el_residual;
  if (!minimizer.converged) report.notes.push_back("minimizer did not converge");

  report.eq28_residual = std::abs(M - minimizer.dual_norm_value);

  const auto traj = functional.flow().trajectory(minimizer.phi_hat_T);
  const double exclusion = opts.exclusion_rel * t_star;
  int flat_samples = 0;
  report.eq27_max_dev = 0.0;
  for (int j = 0; j < traj.size(); ++j) {
    const double t = traj.grid[j];
    if (t <= 0.0 || t >= t_star) continue;
    if (control.distance_to_switch(t) <= exclusion) continue;
    bool counted = false;
    for (int i = 0; i < spec.d; ++i) {
      const auto p = traj.pairings.row(i);
      const double zeta = 1e-9 * p.cwiseAbs().maxCoeff();
      if (std::abs(p[j]) <= zeta) {
        ++flat_samples;
        continue;
      }
      const double expected = spec.k[i] * M * sign_of(p[j]);
      report.eq27_max_dev =
          std::max(report.eq27_max_dev, std::abs(control.value(i, t) - expected));
      counted = true;
    }
    if (counted) ++report.samples;
  }
  report.eq27_ok = report.samples > 0 && report.eq27_max_dev <= opts.tol_level_rel * M;
  if (flat_samples > 0) {
    report.notes.push_back(std::to_string(flat_samples) +
                           " samples skipped where the pairing is numerically zero");
  }

  report.terminal_residual =
      terminal_residual(spec, control, t_star, spec.y0, opts.minimize.ode).value;
  const double tol_terminal =
      opts.tol_terminal > 0.0 ? opts.tol_terminal : default_tol_terminal(spec);
  report.bangbang_ok = check_bangbang(control, M, spec);

  const bool eq28_ok = report.eq28_residual <= opts.tol_eq28_rel * M;
  const bool terminal_ok = report.terminal_residual <= tol_terminal;
  if (!report.eq27_ok) report.notes.push_back("control violates the sign formula");
  if (!eq28_ok) report.notes.push_back("M differs from the dual norm of the minimizer");
  if (!terminal_ok) report.notes.push_back("control does not reach the origin");
  if (!report.bangbang_ok) report.notes.push_back("channel levels differ from k_i M");
  report.accept = report.eq27_ok && eq28_ok && terminal_ok && report.bangbang_ok &&
                  minimizer.converged;
  return report;
}

namespace {

struct Schedule {
  int initial_sign = 1;
  std::vector<int> switches;  // indices into the oracle grid, increasing
  Vector w;                   // terminal displacement per unit level
};

void enumerate_schedules(int interior, int max_switches,
                         const std::vector<Vector>& cumulative, int grid_density,
                         std::vector<Schedule>& out) {
  std::vector<int> idx;
  auto emit = [&]() {
    for (int sign : {1, -1}) {
      Schedule s;
      s.initial_sign = sign;
      s.switches = idx;
      s.w = Vector::Zero(cumulative.front().size());
      int prev = 0;
      int current = sign;
      for (int k : idx) {
        s.w += current * (cumulative[k] - cumulative[prev]);
        prev = k;
        current = -current;
      }
      s.w += current * (cumulative[grid_density] - cumulative[prev]);
      out.push_back(std::move(s));
    }
  };
  // Lexicographic over switch counts, then over index tuples.
  auto recurse = [&](auto&& self, int start, int remaining) -> void {
    if (remaining == 0) {
      emit();
      return;
    }
    for (int k = start; k <= interior - remaining + 1; ++k) {
      idx.push_back(k);
      self(self, k + 1, remaining - 1);
      idx.pop_back();
    }
  };
  for (int n = 0; n <= max_switches; ++n) recurse(recurse, 1, n);
}

// Smallest level L in (0, L*] with |a + L w| <= tol, by safeguarded secant.
double minimal_level(const Vector& a, const Vector& w, double tol, double l_star) {
  auto f = [&](double l) { return (a + l * w).norm() - tol; };
  double lo = 0.0, hi = l_star;
  double f_lo = f(lo), f_hi = f(hi);
  if (f_lo <= 0.0) return 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * l_star; ++it) {
    double x = hi - f_hi * (hi - lo) / (f_hi - f_lo);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    const double fx = f(x);
    if (fx > 0.0) {
      lo = x;
      f_lo = fx;
    } else {
      hi = x;
      f_hi = fx;
    }
    if (std::abs(fx) <= 1e-15 * (1.0 + tol)) return x;
  }
  return hi;
}

}  // namespace

OracleResult brute_force_norm_opt(const ProblemSpec& spec, double T,
                                  int max_switches, int grid_density, double tol) {
  if (spec.d > 2 || max_switches > 3 || max_switches < 0 || grid_density < 2) {
    throw Error(ErrorCode::kOracleBudgetExceeded,
                "oracle supports d <= 2, 0 <= max_switches <= 3, grid_density >= 2");
  }
  const int interior = grid_density - 1;
  double per_channel = 0.0;
  double binom = 1.0;
  for (int n = 0; n <= max_switches; ++n) {
    per_channel += 2.0 * binom;
    binom = binom * (interior - n) / (n + 1);
  }
  if (std::pow(per_channel, spec.d) > 2e7) {
    throw Error(ErrorCode::kOracleBudgetExceeded, "too many oracle candidates");
  }
  if (tol <= 0.0) tol = 1e-6 * (1.0 + spec.y0.norm());

  // Primal route: X = [Phi(t,0) | Z(t)] with X' = -A X + [0 | B].
  const int m = spec.m;
  const long per_cell = (base_steps(T) + grid_density - 1) / grid_density;
  const long steps = per_cell * grid_density;
  const double h = T / static_cast<double>(steps);
  const Matrix B = spec.input_matrix();
  Matrix forcing = Matrix::Zero(m, m + spec.d);
  forcing.rightCols(spec.d) = B;
  auto rhs = [&](double t, const Matrix& x) -> Matrix {
    return -eval_A(spec, t) * x + forcing;
  };
  Matrix x = Matrix::Zero(m, m + spec.d);
  x.leftCols(m) = Matrix::Identity(m, m);
  std::vector<Matrix> at_nodes{x};
  for (long s = 0; s < steps; ++s) {
    const double t = T * static_cast<double>(s) / static_cast<double>(steps);
    const Matrix k1 = rhs(t, x);
    const Matrix k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    const Matrix k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    const Matrix k4 = rhs(t + h, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if ((s + 1) % per_cell == 0) at_nodes.push_back(x);
  }
  const Matrix phi_T0 = at_nodes.back().leftCols(m);
  const Vector a = phi_T0 * spec.y0;

  // cumulative[i][k] = int_0^{t_k} Phi(T,s) b_i ds = Phi(T,0) Phi(t_k,0)^{-1} z_i(t_k).
  std::vector<std::vector<Vector>> cumulative(spec.d);
  for (const auto& node : at_nodes) {
    const Matrix map = phi_T0 * node.leftCols(m).inverse();
    for (int i = 0; i < spec.d; ++i) {
      cumulative[i].push_back(map * node.col(m + i));
    }
  }

  std::vector<std::vector<Schedule>> schedules(spec.d);
  for (int i = 0; i < spec.d; ++i) {
    enumerate_schedules(interior, max_switches, cumulative[i], grid_density,
                        schedules[i]);
  }

  OracleResult out;
  out.M_est = std::numeric_limits<double>::infinity();
  std::vector<const Schedule*> best(spec.d, nullptr);
  std::vector<const Schedule*> pick(spec.d, nullptr);
  auto consider = [&]() {
    ++out.candidates;
    Vector w = Vector::Zero(m);
    for (int i = 0; i < spec.d; ++i) w += spec.k[i] * pick[i]->w;
    const double ww = w.squaredNorm();
    if (ww == 0.0) return;
    const double l_star = -a.dot(w) / ww;
    if (!(l_star > 0.0)) return;
    if ((a + l_star * w).norm() > tol) return;
    const double level = minimal_level(a, w, tol, l_star);
    if (level < out.M_est) {
      out.M_est = level;
      best = pick;
    }
  };
  if (spec.d == 1) {
    for (const auto& s : schedules[0]) {
      pick[0] = &s;
      consider();
    }
  } else {
    for (const auto& s0 : schedules[0]) {
      pick[0] = &s0;
      for (const auto& s1 : schedules[1]) {
        pick[1] = &s1;
        consider();
      }
    }
  }
  if (!best[0]) {
    throw Error(ErrorCode::kOracleInfeasible,
                "no schedule on the oracle grid reaches the terminal tolerance");
  }
  out.best_schedule.T = T;
  out.best_schedule.provenance = Provenance::kManual;
  for (int i = 0; i < spec.d; ++i) {
    BangBangChannel ch;
    ch.level = spec.k[i] * out.M_est;
    ch.initial_sign = best[i]->initial_sign;
    for (int k : best[i]->switches) ch.switch_times.push_back(T * k / grid_density);
    out.best_schedule.channels.push_back(std::move(ch));
  }
  return out;
}

}  // namespace chronotact
