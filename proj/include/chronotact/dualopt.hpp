#pragma once

#include <optional>

#include "chronotact/error.hpp"
#include "chronotact/odeflow.hpp"

namespace chronotact {

struct MinimizerResult {
  Vector phi_hat_T;
  double J_value = 0.0;
  double dual_norm_value = 0.0;
  double el_residual = 0.0;
  int iterations = 0;
  // Last smoothing level of the continuation (0 when Newton from a warm start
  // converged without it); the final polish uses exact signs.
  double epsilon_final = 0.0;
  bool converged = false;
};

/// Thrown when the Euler-Lagrange residual stalls above tolerance; carries the
/// best point found.
class MinimizerStalled : public Error {
 public:
  MinimizerStalled(MinimizerResult best, const std::string& message)
      : Error(ErrorCode::kMaxIterations, message), best_(std::move(best)) {}
  const MinimizerResult& best() const { return best_; }

 private:
  MinimizerResult best_;
};

struct MinimizeOptions {
  // Negative selects 1e-8 * (1 + |y0|).
  double tol_el = -1.0;
  int max_iterations = 200;
  bool smoothing = true;
  // Previous minimizer at a nearby horizon; rescaled along its ray.
  std::optional<Vector> warm_start;
  // Skips the built-in initialization entirely.
  std::optional<Vector> initial_point;
  bool throw_on_stall = true;
  OdeOptions ode;
};

/// J^T(phi_T) = 1/2 |phi_T|_*^2 + <phi(0), y0> for one horizon, with the dual
/// fundamental matrices computed once. phi(t) = Psi(t,T) phi_T is linear in
/// phi_T, so every evaluation reduces to inner products with precomputed
/// pairing vectors g_i(t) = Psi(t,T)^T b_i.
class DualFunctional {
 public:
  DualFunctional(const ProblemSpec& spec, double T, const OdeOptions& opts = {});

  struct Derivatives {
    double norm = 0.0;
    double value = 0.0;
    Vector norm_grad;
    // Generalized Hessian of the norm: sum over pairing roots r of
    // 2 k_i g_i(r) g_i(r)^T / |p_i'(r)|.
    Matrix norm_hessian;
    Vector grad;  // norm * norm_grad + linear_term
  };

  struct Smoothed {
    double value = 0.0;
    Vector grad;
  };

  const ProblemSpec& spec() const { return flow_.spec(); }
  double T() const { return flow_.T(); }
  const DualFlow& flow() const { return flow_; }
  /// c = Psi(0,T)^T y0, so that <phi(0), y0> = <c, phi_T>.
  const Vector& linear_term() const { return c_; }

  double norm(const Vector& phi_T) const;
  double value(const Vector& phi_T) const;
  Derivatives derivatives(const Vector& phi_T, bool with_hessian = true) const;
  /// max_j |norm * d norm/d e_j + c_j|: the first variation of J^T along the
  /// canonical directions, with exact signs.
  double el_residual(const Vector& phi_T) const;
  /// J^T with |x| replaced by sqrt(x^2 + eps^2) on the node quadrature, and
  /// its exact gradient.
  Smoothed smoothed(const Vector& phi_T, double eps) const;

 private:
  DualFlow flow_;
  Vector c_;
  std::vector<Matrix> g_;   // per channel, m x n
  std::vector<Matrix> dg_;  // per channel, m x n, d/dt g_i = Psi^T A b_i
};

double dual_norm(const ProblemSpec& spec, double T, const Vector& phi_T,
                 const OdeOptions& opts = {});
double eval_JT(const ProblemSpec& spec, double T, const Vector& phi_T,
               const OdeOptions& opts = {});
double el_residual(const ProblemSpec& spec, double T, const Vector& phi_hat_T,
                   const OdeOptions& opts = {});

/// Default Euler-Lagrange tolerance 1e-8 * (1 + |y0|).
double default_tol_el(const ProblemSpec& spec);

MinimizerResult minimize_JT(const DualFunctional& functional,
                            const MinimizeOptions& opts = {});
MinimizerResult minimize_JT(const ProblemSpec& spec, double T,
                            const MinimizeOptions& opts = {});

}  // namespace chronotact
