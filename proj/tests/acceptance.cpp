// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "chronotact/steering.hpp"
#include "chronotact/timeopt.hpp"
#include "oracles.hpp"

using namespace chronotact;
using oracle::kPi;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Criterion 1: scalar integrator closed forms and per-solve time.
void scalar_integrator(Outcome& out) {
  const auto spec = oracle::scalar();
  double worst_m = 0.0, worst_t = 0.0, slowest = 0.0;
  for (double T : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const auto start = std::chrono::steady_clock::now();
    const double m = synthesize_norm_optimal(spec, T).M_tilde;
    slowest = std::max(slowest, seconds_since(start));
    worst_m = std::max(worst_m, std::abs(m - oracle::scalar_mtilde(T)));
  }
  for (double M : {0.5, 1.0, 2.0}) {
    const auto start = std::chrono::steady_clock::now();
    const double t = solve_time_optimal(spec, M).t_star;
    slowest = std::max(slowest, seconds_since(start));
    worst_t = std::max(worst_t, std::abs(t - oracle::scalar_tstar(M)));
  }
  out.detail << "max |M~-1/T| = " << worst_m << ", max |t*-1/M| = " << worst_t
             << ", slowest solve " << slowest << " s";
  out.require(worst_m <= 1e-6, "M~(T) = 1/T within 1e-6");
  out.require(worst_t <= 1e-5, "t*(M) = 1/M within 1e-5");
  out.require(slowest < 1.0, "each solve < 1 s");
}

// Criterion 2: classical minimum-time solution of the double integrator.
void double_integrator(Outcome& out) {
  const auto r = solve_time_optimal(oracle::double_integrator(), 1.0);
  const auto& switches = r.control.channels[0].switch_times;
  const double terminal = r.verification->terminal_residual;
  out.detail << "t* = " << r.t_star << ", switches = " << switches.size();
  if (!switches.empty()) out.detail << " at " << switches[0];
  out.detail << ", terminal residual " << terminal;
  out.require(std::abs(r.t_star - 2.0) <= 1e-3, "t* = 2 within 1e-3");
  out.require(switches.size() == 1 && std::abs(switches[0] - 1.0) <= 1e-3,
              "one switch at 1 within 1e-3");
  out.require(terminal <= 1e-5, "terminal residual <= 1e-5");
}

// Criterion 3: J^T is affine on the segment of the non-strict-convexity example.
void remark_segment(Outcome& out) {
  const auto spec = oracle::rotation();
  const DualFunctional f(spec, kPi / 4);
  Vector p1(2), p2(2);
  const double a = 1 + std::sqrt(2.0) / 2;
  p1 << 1, 0;
  p2 << a, a;
  double worst = 0.0;
  for (int i = 1; i <= 9; ++i) {
    const double lam = 0.1 * i;
    worst = std::max(worst, std::abs(f.value(lam * p1 + (1 - lam) * p2) - lam * f.value(p1) -
                                     (1 - lam) * f.value(p2)));
  }
  out.detail << "max affine defect " << worst;
  out.require(worst <= 1e-8, "defect <= 1e-8");
}

// Criterion 4: t* and M~ invert each other.
void round_trips(Outcome& out) {
  double horizon = 0.0, bound = 0.0;
  for (const auto& spec : {oracle::scalar(), oracle::double_integrator()}) {
    const auto r = roundtrip_check(spec, {0.5, 1.0, 2.0}, {0.5, 1.0, 2.0});
    horizon = std::max(horizon, r.max_horizon_deviation);
    bound = std::max(bound, r.max_bound_deviation);
  }
  out.detail << "max |t*(M~(T))-T|/T = " << horizon << ", max |M~(t*(M))-M|/M = " << bound;
  out.require(horizon <= 1e-3, "horizon round trip <= 1e-3");
  out.require(bound <= 1e-3, "bound round trip <= 1e-3");
}

// Criterion 5: Euler-Lagrange certificate on every returned minimizer.
void euler_lagrange(Outcome& out) {
  double worst = 0.0;
  int count = 0;
  auto record = [&](const ProblemSpec& spec, double T) {
    const auto r = minimize_JT(spec, T);
    const double scaled = r.el_residual / (1 + spec.y0.norm());
    worst = std::max(worst, scaled);
    ++count;
  };
  for (double T : {0.5, 1.0, 2.0, 4.0}) {
    record(oracle::scalar(), T);
    record(oracle::double_integrator(), T);
    record(oracle::rotation(), T);
  }
  std::mt19937 rng(20240601);
  int random_systems = 0, rejected = 0;
  while (random_systems < 20) {
    const auto spec = oracle::random_system(rng, 1 + random_systems % 2);
    bool rank_ok = validate_spec(spec).ok;
    for (int i = 0; i < spec.d; ++i) rank_ok = rank_ok && kalman_rank_check(spec, i).passes;
    if (!rank_ok) {
      ++rejected;
      continue;
    }
    ++random_systems;
    record(spec, 0.5 + 0.1 * random_systems);
  }
  out.detail << count << " minimizers (" << random_systems << " random systems, " << rejected
             << " rejected by the rank heuristic), max el_residual/(1+|y0|) = " << worst;
  out.require(worst <= 1e-6, "el_residual <= 1e-6 (1+|y0|)");
}

// Criterion 6: channel levels of time-optimal controls and rejection of a
// perturbed level.
void strong_bangbang(Outcome& out) {
  struct Case {
    ProblemSpec spec;
    double M;
  };
  std::vector<Case> cases{{oracle::scalar(), 0.5},
                          {oracle::scalar(), 2.0},
                          {oracle::double_integrator(), 1.0},
                          {oracle::double_integrator(), 0.5},
                          {oracle::rotation(), 1.0}};
  double worst = 0.0;
  bool rejected = true;
  for (const auto& c : cases) {
    const auto r = solve_time_optimal(c.spec, c.M);
    const double exclusion = 1e-3 * r.t_star;
    const int samples = 20000;
    for (int j = 0; j <= samples; ++j) {
      const double t = r.t_star * j / samples;
      if (r.control.distance_to_switch(t) <= exclusion) continue;
      for (int i = 0; i < c.spec.d; ++i) {
        worst = std::max(worst,
                         std::abs(std::abs(r.control.value(i, t)) - c.spec.k[i] * c.M) / c.M);
      }
    }
    auto tampered = r.control;
    tampered.channels[0].level *= 1.01;
    rejected = rejected && !check_time_optimality(c.spec, c.M, r.t_star, tampered).accept;
  }
  out.detail << "max ||u|-k M|/M = " << worst << ", 1% perturbations "
             << (rejected ? "all rejected" : "NOT all rejected");
  out.require(worst <= 1e-9, "levels within 1e-9 M");
  out.require(rejected, "perturbed level rejected");
}

// Criterion 7: exhaustive schedule search agrees with the minimizer.
void oracle_agreement(Outcome& out) {
  const double s1 = brute_force_norm_opt(oracle::scalar(), 1.0, 0, 16).M_est;
  const double s1_solver = synthesize_norm_optimal(oracle::scalar(), 1.0).M_tilde;
  const double s2 = brute_force_norm_opt(oracle::double_integrator(), 2.0, 1, 200).M_est;
  const double s2_solver = synthesize_norm_optimal(oracle::double_integrator(), 2.0).M_tilde;
  const double d1 = std::abs(s1 - s1_solver) / s1_solver;
  const double d2 = std::abs(s2 - s2_solver) / s2_solver;
  out.detail << "scalar rel. gap " << d1 << ", double integrator rel. gap " << d2;
  out.require(d1 <= 0.02 && d2 <= 0.02, "oracle within 2%");
}

// Criterion 8: exact bracket halving and convergence of the iterate controls.
void iterate_convergence(Outcome& out) {
  bool halving = true;
  double worst = 0.0;
  struct Case {
    ProblemSpec spec;
    double M;
    BangBangControl exact;
  };
  auto exact_scalar = [](double M) {
    BangBangControl u;
    u.T = oracle::scalar_tstar(M);
    u.channels.push_back({M, -1, {}});
    return u;
  };
  auto exact_di = [](double M) {
    BangBangControl u;
    u.T = oracle::di_tstar(M);
    u.channels.push_back({M, -1, {0.5 * u.T}});
    return u;
  };
  std::vector<Case> cases{{oracle::scalar(), 0.5, exact_scalar(0.5)},
                          {oracle::scalar(), 1.0, exact_scalar(1.0)},
                          {oracle::scalar(), 2.0, exact_scalar(2.0)},
                          {oracle::double_integrator(), 1.0, exact_di(1.0)}};
  for (const auto& c : cases) {
    TimeOptOptions opts;
    opts.early_exit = false;
    const auto r = bisect_optimal_time(c.spec, c.M, opts);
    double width = r.trace.K * r.trace.t0;
    for (const auto& e : r.trace.entries) {
      halving = halving && (e.b - e.a == 0.5 * width);
      width = e.b - e.a;
    }
    const auto& last = r.trace.entries.back().control;
    const double t_star = c.exact.T;
    const double dist = l2_distance(last, c.exact, t_star) / (std::sqrt(t_star) * c.M);
    worst = std::max(worst, dist);
  }
  out.detail << "bracket halving " << (halving ? "exact" : "INEXACT")
             << ", max L2 distance / (sqrt(t*) M) = " << worst;
  out.require(halving, "bracket width halves exactly");
  out.require(worst <= 1e-3, "L2 distance <= 1e-3 sqrt(t*) M");
}

// Criterion 9: duality and semigroup invariants of the transition matrices.
void flow_invariants(Outcome& out) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> time(0.0, 6.0);
  double duality = 0.0, semigroup = 0.0;
  for (const auto& spec : {oracle::rotation(), oracle::double_integrator()}) {
    for (int trial = 0; trial < 50; ++trial) {
      const double s = time(rng), r = time(rng), t = time(rng);
      const Matrix phi = transition(spec, s, t, FlowKind::kPrimal).value;
      const Matrix psi = transition(spec, s, t, FlowKind::kDual).value;
      duality = std::max(
          duality, (phi.transpose() * psi - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff());
      const Matrix composed = transition(spec, r, t, FlowKind::kPrimal).value *
                              transition(spec, s, r, FlowKind::kPrimal).value;
      semigroup = std::max(semigroup, (composed - phi).cwiseAbs().maxCoeff());
    }
  }
  out.detail << "max |Phi^T Psi - I| = " << duality << ", max semigroup deviation "
             << semigroup;
  out.require(duality <= 1e-9, "duality <= 1e-9");
  out.require(semigroup <= 1e-9, "semigroup <= 1e-9");
}

// Criterion 10: Gramian steering to the origin.
void gramian_steering(Outcome& out) {
  std::mt19937 rng(7);
  std::normal_distribution<double> g;
  double terminal = 0.0, scalar_dev = 0.0;
  const double tau = 0.5, T = 2.5;
  for (const auto& spec : {oracle::scalar(), oracle::double_integrator()}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Vector z0 = Vector::NullaryExpr(spec.m, [&] { return g(rng); });
      const auto r = steer_to_zero(spec, tau, T, z0);
      terminal = std::max(terminal, r.terminal_norm / z0.norm());
      if (spec.m == 1) {
        const double expected = -z0[0] / (T - tau);
        scalar_dev = std::max(scalar_dev,
                              (r.control.samples.array() - expected).abs().maxCoeff());
      }
    }
  }
  out.detail << "max |y(T)|/|z0| = " << terminal << ", scalar samplewise deviation "
             << scalar_dev;
  out.require(terminal <= 1e-8, "terminal <= 1e-8 |z0|");
  out.require(scalar_dev <= 1e-10, "scalar control within 1e-10");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"scalar integrator closed forms", scalar_integrator},
      {"double integrator minimum time", double_integrator},
      {"affine segment of J^T", remark_segment},
      {"round-trip identities", round_trips},
      {"Euler-Lagrange certificate", euler_lagrange},
      {"strong bang-bang property", strong_bangbang},
      {"oracle agreement", oracle_agreement},
      {"iterate convergence", iterate_convergence},
      {"dual-flow invariants", flow_invariants},
      {"Gramian steering", gramian_steering},
  };
  int failures = 0;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    failures += !out.pass;
    std::printf("criterion %2zu: %s  %s (%.2f s): %s\n", i + 1, out.pass ? "PASS" : "FAIL",
                criteria[i].first.c_str(), seconds_since(t0), out.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed in %.1f s\n",
              static_cast<int>(criteria.size()) - failures, criteria.size(),
              seconds_since(start));
  return failures == 0 ? 0 : 1;
}
