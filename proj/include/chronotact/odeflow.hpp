#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "chronotact/control.hpp"
#include "chronotact/model.hpp"

namespace chronotact {

struct OdeOptions {
  // Bound on the Richardson discrepancy between step counts N and 2N,
  // relative to max(1, |result|).
  double tol = 1e-10;
  long max_steps = 1L << 22;
};

enum class FlowKind {
  kPrimal,  // d/dt Phi(t,s) = -A(t) Phi(t,s)
  kDual,    // d/dt Psi(t,s) =  A(t)^T Psi(t,s)
};

struct TransitionMatrix {
  Matrix value;
  double from = 0.0;
  double to = 0.0;
  FlowKind kind = FlowKind::kPrimal;
};

/// Base step count for an interval: max(2048, ceil(length * 256)).
long base_steps(double length);

/// Classical RK4 propagator of X' = G(t) X over [t, t + h]; h may be negative.
/// G = -A for the primal flow and G = A^T for the dual flow.
Matrix rk4_step(const ProblemSpec& spec, FlowKind kind, double t, double h);

TransitionMatrix transition(const ProblemSpec& spec, double s, double t,
                            FlowKind kind, const OdeOptions& opts = {});

/// Sampled solution of the dual equation phi' = A^T phi with phi(T) = phi_T.
struct DualTrajectory {
  double T = 0.0;
  Vector phi_T;
  std::vector<double> grid;  // strictly increasing, grid.back() == T
  Matrix phi;                // m x n
  Matrix pairings;           // d x n, <b_i, phi(grid[j])>

  int size() const { return static_cast<int>(grid.size()); }
};

/// Dual fundamental matrices Psi(t_j, T) on a uniform grid over [t_begin, T],
/// built backward from Psi(T, T) = I in the reversed time tau = T - t.
/// The solution of the dual equation with terminal datum phi_T is then
/// phi(t_j) = Psi(t_j, T) phi_T.
class DualFlow {
 public:
  static DualFlow compute(const ProblemSpec& spec, double T, double t_begin = 0.0,
                          const OdeOptions& opts = {});

  const ProblemSpec& spec() const { return spec_; }
  double T() const { return T_; }
  double t_begin() const { return grid_.front(); }
  const std::vector<double>& grid() const { return grid_; }
  int size() const { return static_cast<int>(grid_.size()); }
  const Matrix& psi(int j) const { return psi_[j]; }
  /// Psi(r, T) for r inside panel [t_j, t_{j+1}], one step from the right node.
  Matrix psi_at(double r, int panel) const;
  /// Psi(t_begin, T).
  const Matrix& psi_begin() const { return psi_.front(); }

  DualTrajectory trajectory(const Vector& phi_T) const;

 private:
  ProblemSpec spec_;
  double T_ = 0.0;
  std::vector<double> grid_;
  std::vector<Matrix> psi_;
};

DualTrajectory solve_dual(const ProblemSpec& spec, double T, const Vector& phi_T,
                          const OdeOptions& opts = {});

/// Sign change of one channel pairing: an interior root localized inside a
/// panel, or a node where the samples pass through zero.
struct SignChange {
  double t = 0.0;
  int panel = 0;       // root lies in [grid[panel], grid[panel + 1]]
  bool at_node = false;  // root sits exactly on grid[panel]
};

/// Pairing value <b, phi(r)> for r inside a panel, stepping from the right
/// node of the trajectory.
double pairing_at(const ProblemSpec& spec, const DualTrajectory& traj,
                  int channel, int panel, double r);

/// Relative magnitude below which a pairing sample counts as zero.
inline constexpr double kPairingZeroRel = 1e-13;

/// All sign changes of the channel pairing in the open interval, each
/// interior root refined by bisection to width 1e-12 * T.
std::vector<SignChange> pairing_sign_changes(const ProblemSpec& spec,
                                             const DualTrajectory& traj,
                                             int channel);

/// Integral over the trajectory horizon of sum_i weights_i |<b_i, phi(t)>|,
/// with every kink split out so that no panel straddles a sign change.
double kink_integral(const ProblemSpec& spec, const DualTrajectory& traj,
                     std::span<const double> weights);

/// Primal state samples.
struct Trajectory {
  std::vector<double> grid;
  Matrix y;  // m x n
  double terminal_norm = 0.0;

  Vector terminal() const { return y.col(y.cols() - 1); }
};

/// Propagates y' + A(t) y = sum_i b_i u^i(t) from y(t_begin) = y0 to T.
/// Bang-bang switch times become integration nodes. Sampled controls are
/// stepped on their own sample grid (two sample intervals per RK4 step)
/// without a Richardson check.
Trajectory propagate_primal(const ProblemSpec& spec, const Vector& y0,
                            const Control& control, double T,
                            const OdeOptions& opts = {}, double t_begin = 0.0);

/// CSV with header t,y1,...,ym and 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace chronotact
