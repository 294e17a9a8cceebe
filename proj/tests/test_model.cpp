#include <gtest/gtest.h>

#include "chronotact/error.hpp"
#include "chronotact/model.hpp"
#include "oracles.hpp"

using namespace chronotact;

namespace {

ErrorCode code_of(const std::string& text) {
  try {
    parse_problem(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for " << text;
  return ErrorCode::kNumerical;
}

}  // namespace

TEST(Parse, ScalarLiteralFields) {
  const auto spec = oracle::scalar();
  EXPECT_EQ(spec.m, 1);
  EXPECT_EQ(spec.d, 1);
  EXPECT_DOUBLE_EQ(spec.b[0][0], 1.0);
  EXPECT_DOUBLE_EQ(spec.k[0], 1.0);
  EXPECT_DOUBLE_EQ(spec.y0[0], 1.0);
  EXPECT_TRUE(spec.A[0][0].is_constant());
  EXPECT_DOUBLE_EQ(spec.A[0][0](2.0), 0.0);
}

TEST(Parse, RotationPolynomialEntries) {
  const auto spec = oracle::build(R"({"m":2,"d":1,
    "A":[[{"terms":[{"kind":"poly","coeffs":[0]}]},{"terms":[{"kind":"poly","coeffs":[-1]}]}],
         [{"terms":[{"kind":"poly","coeffs":[1]}]},{"terms":[{"kind":"poly","coeffs":[0]}]}]],
    "b":[[1,0]],"k":[1],"y0":[1,1]})");
  EXPECT_EQ(spec, oracle::rotation());
}

TEST(Parse, SyntaxAndSchemaErrors) {
  EXPECT_EQ(code_of("{\"m\":1,"), ErrorCode::kSyntax);
  EXPECT_EQ(code_of(R"({"m":2,"d":1,"A":[[0,0],[0,0]],"b":[[1,0,0]],"k":[1],"y0":[1,0]})"),
            ErrorCode::kSchema);
  EXPECT_EQ(code_of(R"({"m":1,"d":1,"A":[[0]],"b":[[1]],"k":[1]})"), ErrorCode::kSchema);
  EXPECT_EQ(code_of(R"({"m":1,"d":2,"A":[[0]],"b":[[1]],"k":[1]  ,"y0":[1]})"),
            ErrorCode::kSchema);
  EXPECT_EQ(code_of(R"({"m":1,"d":1,"A":[["x"]],"b":[[1]],"k":[1],"y0":[1]})"),
            ErrorCode::kSchema);
}

TEST(Parse, ErrorsAreInputErrors) {
  try {
    parse_problem("not json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.is_input_error());
  }
}

TEST(Parse, SerializeRoundTrip) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto spec = oracle::random_system(rng, 1 + trial % 2);
    const auto back = parse_problem(serialize_problem(spec));
    EXPECT_EQ(back, spec);
    // Serialization is a fixed point.
    EXPECT_EQ(serialize_problem(back), serialize_problem(spec));
  }
}

TEST(Validate, ScalarIsClean) {
  const auto report = validate_spec(oracle::scalar());
  EXPECT_TRUE(report.ok);
  EXPECT_TRUE(report.violations.empty());
  EXPECT_TRUE(report.warnings.empty());
}

TEST(Validate, Violations) {
  auto spec = oracle::scalar();
  spec.y0 = Vector::Zero(1);
  auto report = validate_spec(spec);
  EXPECT_FALSE(report.ok);
  EXPECT_TRUE(report.has_violation("Y0_ZERO"));

  spec = oracle::scalar();
  spec.k = {0.5};
  EXPECT_TRUE(validate_spec(spec).has_violation("K_FIRST"));

  spec = oracle::build(
      R"({"m":2,"d":2,"A":[[0,-1],[0,0]],"b":[[0,1],[1,0]],"k":[1,2],"y0":[1,0]})");
  EXPECT_TRUE(validate_spec(spec).has_violation("K_ORDER"));
}

TEST(Validate, ContiHeuristicWarning) {
  const auto spec =
      oracle::build(R"({"m":2,"d":1,"A":[[0,0],[0,0]],"b":[[1,0]],"k":[1],"y0":[1,0]})");
  const auto report = validate_spec(spec);
  EXPECT_TRUE(report.ok);
  EXPECT_TRUE(report.has_warning("CONTI_HEURISTIC_FAIL"));
  const auto rank = kalman_rank_check(spec, 0);
  EXPECT_EQ(rank.rank, 1);
  EXPECT_FALSE(rank.passes);
}

TEST(Validate, TimeVaryingIsSampled) {
  const auto spec = oracle::build(R"({"m":2,"d":1,
    "A":[[0,{"terms":[{"kind":"poly","coeffs":[-1,0.5]}]}],[0,0]],
    "b":[[0,1]],"k":[1],"y0":[1,0]})");
  const auto report = validate_spec(spec);
  EXPECT_TRUE(report.has_warning("CONTI_HEURISTIC_SAMPLED"));
  EXPECT_TRUE(kalman_rank_check(spec, 0).approximate);
}

TEST(KalmanRank, ClosedForms) {
  auto r = kalman_rank_check(oracle::scalar(), 0);
  EXPECT_EQ(r.rank, 1);
  EXPECT_TRUE(r.passes);
  r = kalman_rank_check(oracle::double_integrator(), 0);
  EXPECT_EQ(r.rank, 2);
  EXPECT_TRUE(r.passes);
  EXPECT_FALSE(r.approximate);
}

TEST(EvalA, Examples) {
  EXPECT_DOUBLE_EQ(eval_A(oracle::scalar(), 3.7)(0, 0), 0.0);
  Matrix rot(2, 2);
  rot << 0, -1, 1, 0;
  for (double t : {0.0, 1.3, 17.0}) EXPECT_EQ(eval_A(oracle::rotation(), t), rot);

  EntryExpression e;
  e.terms.push_back(PolyTerm{{1.0, 2.0}});
  e.terms.push_back(SinusoidTerm{1.0, 1.0, 0.0, SinusoidKind::kSin});
  EXPECT_DOUBLE_EQ(e(0.0), 1.0);
  EXPECT_NEAR(e(0.5), 1.0 + 1.0 + std::sin(0.5), 1e-15);
  EXPECT_FALSE(e.is_constant());
  SinusoidTerm c{2.0, 3.0, 0.25, SinusoidKind::kCos};
  EntryExpression ec;
  ec.terms.push_back(c);
  EXPECT_NEAR(ec(0.7), 2.0 * std::cos(3.0 * 0.7 + 0.25), 1e-15);
}
