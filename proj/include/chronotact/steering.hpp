#pragma once

#include "chronotact/error.hpp"
#include "chronotact/odeflow.hpp"

namespace chronotact {

struct GramianResult {
  Matrix W;
  double tau = 0.0;
  double T = 0.0;
  double min_eigenvalue = 0.0;
};

struct SteeringResult {
  // Samples of the steering control on [tau, T]; only `channel` is nonzero.
  SampledControl control;
  int channel = 0;
  double sup_norm = 0.0;
  // |b^T Phi(T,.)^T|_inf * |W^{-1}| * |Phi(T,tau)|, so sup_norm <= bound * |z0|.
  double bound = 0.0;
  double terminal_norm = 0.0;
  GramianResult gramian;
};

/// W(tau,T) = int_tau^T Phi(T,s) b b^T Phi(T,s)^T ds for one channel, by
/// Simpson's rule on the transition grid. Throws SingularGramian when the
/// smallest eigenvalue is at most 1e-12 * trace(W).
GramianResult gramian(const ProblemSpec& spec, double tau, double T, int channel,
                      const OdeOptions& opts = {});

/// u(t) = -b^T Phi(T,t)^T W(tau,T)^{-1} Phi(T,tau) z0, which drives
/// y' + A y = b u from y(tau) = z0 to y(T) = 0.
SteeringResult steer_to_zero(const ProblemSpec& spec, double tau, double T,
                             const Vector& z0, int channel = 0,
                             const OdeOptions& opts = {});

}  // namespace chronotact
