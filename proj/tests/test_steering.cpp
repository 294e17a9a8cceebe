#include <gtest/gtest.h>

#include <random>

#include "chronotact/steering.hpp"
#include "oracles.hpp"

using namespace chronotact;

TEST(Gramian, ScalarIsIntervalLength) {
  EXPECT_NEAR(gramian(oracle::scalar(), 0.0, 3.0, 0).W(0, 0), 3.0, 1e-13);
  EXPECT_NEAR(gramian(oracle::scalar(), 1.0, 3.0, 0).W(0, 0), 2.0, 1e-13);
}

TEST(Gramian, DoubleIntegratorClosedForm) {
  // int_0^L (L-s, 1)(L-s, 1)^T ds
  const double L = 1.7;
  const auto W = gramian(oracle::double_integrator(), 0.3, 0.3 + L, 0).W;
  Matrix exact(2, 2);
  exact << L * L * L / 3, L * L / 2, L * L / 2, L;
  EXPECT_LE((W - exact).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gramian, SingularForUncontrollablePair) {
  const auto spec =
      oracle::build(R"({"m":2,"d":1,"A":[[0,0],[0,0]],"b":[[1,0]],"k":[1],"y0":[1,0]})");
  try {
    gramian(spec, 0.0, 1.0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularGramian);
  }
}

TEST(Gramian, MonotoneInHorizon) {
  const auto spec = oracle::rotation();
  const auto W1 = gramian(spec, 0.0, 1.0, 0).W;
  // W(0, T) for a longer horizon dominates after transport: compare the
  // Gramians over nested windows ending at the same T.
  const auto inner = gramian(spec, 0.5, 2.0, 0).W;
  const auto outer = gramian(spec, 0.0, 2.0, 0).W;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(outer - inner);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  EXPECT_GT(W1.trace(), 0.0);
}

TEST(Steer, ScalarClosedForm) {
  const auto r = steer_to_zero(oracle::scalar(), 0.0, 2.0, Vector::Constant(1, 1.0));
  EXPECT_LE((r.control.samples.array() + 0.5).abs().maxCoeff(), 1e-10);
  EXPECT_NEAR(r.sup_norm, 0.5, 1e-10);
  EXPECT_LE(r.terminal_norm, 1e-10);
  const auto z = steer_to_zero(oracle::scalar(), 0.5, 2.0, Vector::Zero(1));
  EXPECT_EQ(z.control.samples.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Steer, DoubleIntegrator) {
  Vector z0(2);
  z0 << 1.0, 0.0;
  const auto r = steer_to_zero(oracle::double_integrator(), 0.0, 2.0, z0);
  EXPECT_LE(r.terminal_norm, 1e-8);
  EXPECT_TRUE(std::isfinite(r.sup_norm));
  EXPECT_LE(r.sup_norm, r.bound * z0.norm());
  // Minimum-energy control from (1, 0) over [0, 2]: u(t) = -3/2 (1 - t).
  const int n = static_cast<int>(r.control.samples.cols());
  for (int j = 0; j < n; j += 257) {
    const double t = 2.0 * j / (n - 1);
    EXPECT_NEAR(r.control.samples(0, j), -1.5 * (1.0 - t), 1e-9);
  }
}

TEST(Steer, LinearInInitialState) {
  const auto spec = oracle::rotation();
  Vector a(2), b(2);
  a << 0.3, -1.0;
  b << 2.0, 0.5;
  const auto ra = steer_to_zero(spec, 0.2, 2.2, a);
  const auto rb = steer_to_zero(spec, 0.2, 2.2, b);
  const auto rab = steer_to_zero(spec, 0.2, 2.2, 2.0 * a - b);
  EXPECT_LE((rab.control.samples - (2.0 * ra.control.samples - rb.control.samples))
                .cwiseAbs()
                .maxCoeff(),
            1e-10);
  EXPECT_LE(rab.terminal_norm, 1e-8 * (2.0 * a - b).norm());
}

TEST(Steer, RandomInitialStates) {
  std::mt19937 rng(17);
  std::normal_distribution<double> g;
  for (const auto& spec : {oracle::scalar(), oracle::double_integrator()}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Vector z0 = Vector::NullaryExpr(spec.m, [&] { return g(rng); });
      const auto r = steer_to_zero(spec, 0.25, 1.75, z0);
      EXPECT_LE(r.terminal_norm, 1e-8 * z0.norm());
    }
  }
}

TEST(Steer, InvalidArguments) {
  EXPECT_THROW(steer_to_zero(oracle::scalar(), 2.0, 1.0, Vector::Ones(1)), Error);
  EXPECT_THROW(steer_to_zero(oracle::scalar(), 0.0, 1.0, Vector::Ones(1), 3), Error);
}
