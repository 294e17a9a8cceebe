#include "chronotact/steering.hpp"

#include <cmath>


namespace chronotact {

namespace {

// Phi(T,s) b = Psi(s,T)^T b on the grid of the dual flow.
Matrix channel_images(const DualFlow& flow, int channel) {
  const auto& b = flow.spec().b[channel];
  Matrix g(flow.spec().m, flow.size());
  for (int j = 0; j < flow.size(); ++j) g.col(j) = flow.psi(j).transpose() * b;
  return g;
}

GramianResult assemble(const DualFlow& flow, const Matrix& g, double tau, double T) {
  const int m = flow.spec().m;
  const int n = flow.size();  // odd: the flow grid has an even panel count
  const double h = (T - tau) / static_cast<double>(n - 1);
  GramianResult out;
  out.tau = tau;
  out.T = T;
  out.W = Matrix::Zero(m, m);
  for (int j = 0; j < n; ++j) {
    const double w = (j == 0 || j == n - 1) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
    out.W += w * g.col(j) * g.col(j).transpose();
  }
  out.W *= h / 3.0;
  out.W = 0.5 * (out.W + out.W.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(out.W, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = eig.eigenvalues().minCoeff();
  if (out.min_eigenvalue <= 1e-12 * out.W.trace()) {
    throw Error(ErrorCode::kSingularGramian,
                "controllability Gramian is singular (min eigenvalue " +
                    std::to_string(out.min_eigenvalue) + ")");
  }
  return out;
}

void check_interval(const ProblemSpec& spec, double tau, double T, int channel) {
  if (!(tau >= 0.0 && tau < T)) {
    throw Error(ErrorCode::kInvalidArgument, "steering needs 0 <= tau < T");
  }
  if (channel < 0 || channel >= spec.d) {
    throw Error(ErrorCode::kInvalidArgument, "channel out of range");
  }
}

}  // namespace

GramianResult gramian(const ProblemSpec& spec, double tau, double T, int channel,
                      const OdeOptions& opts) {
  check_interval(spec, tau, T, channel);
  const auto flow = DualFlow::compute(spec, T, tau, opts);
  return assemble(flow, channel_images(flow, channel), tau, T);
}

SteeringResult steer_to_zero(const ProblemSpec& spec, double tau, double T,
                             const Vector& z0, int channel, const OdeOptions& opts) {
  check_interval(spec, tau, T, channel);
  const auto flow = DualFlow::compute(spec, T, tau, opts);
  const Matrix g = channel_images(flow, channel);

  SteeringResult out;
  out.channel = channel;
  out.gramian = assemble(flow, g, tau, T);
  const Matrix phi_T_tau = flow.psi_begin().transpose();
  const Eigen::LLT<Matrix> llt(out.gramian.W);
  const Vector coeff = llt.solve(phi_T_tau * z0);

  const int n = flow.size();
  out.control.t_begin = tau;
  out.control.t_end = T;
  out.control.samples = Matrix::Zero(spec.d, n);
  for (int j = 0; j < n; ++j) {
    out.control.samples(channel, j) = -g.col(j).dot(coeff);
  }
  out.sup_norm = out.control.samples.row(channel).cwiseAbs().maxCoeff();

  const Matrix w_inv = llt.solve(Matrix::Identity(spec.m, spec.m));
  double image_sup = 0.0;
  for (int j = 0; j < n; ++j) image_sup = std::max(image_sup, g.col(j).norm());
  out.bound = image_sup * w_inv.operatorNorm() * phi_T_tau.operatorNorm();

  out.terminal_norm =
      propagate_primal(spec, z0, out.control, T, opts, tau).terminal_norm;
  return out;
}

}  // namespace chronotact
