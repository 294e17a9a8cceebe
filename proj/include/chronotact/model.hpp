#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace chronotact {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// c0 + c1*t + c2*t^2 + ...
struct PolyTerm {
  std::vector<double> coeffs;

  bool operator==(const PolyTerm&) const = default;
};

enum class SinusoidKind { kSin, kCos };

// amplitude * sin(omega*t + phase) or amplitude * cos(omega*t + phase)
struct SinusoidTerm {
  double amplitude = 0.0;
  double omega = 0.0;
  double phase = 0.0;
  SinusoidKind kind = SinusoidKind::kSin;

  bool operator==(const SinusoidTerm&) const = default;
};

using Term = std::variant<PolyTerm, SinusoidTerm>;

/// One entry of A(t): a finite sum of polynomial and sinusoidal terms, so the
/// entry is real analytic by construction. An empty sum is identically zero.
struct EntryExpression {
  std::vector<Term> terms;

  double operator()(double t) const;
  /// True when the entry does not depend on t.
  bool is_constant() const;

  static EntryExpression constant(double value);

  bool operator==(const EntryExpression&) const = default;
};

/// The controlled system y' + A(t) y = sum_i b_i u^i, y(0) = y0, together with
/// the channel weights 1 = k_0 >= k_1 >= ... > 0.
struct ProblemSpec {
  int m = 0;
  int d = 0;
  std::vector<std::vector<EntryExpression>> A;  // m x m, row major
  std::vector<Vector> b;                        // d vectors in R^m
  std::vector<double> k;                        // d weights
  Vector y0;

  /// Column matrix [b_0 ... b_{d-1}].
  Matrix input_matrix() const;
  bool is_time_invariant() const;
};

bool operator==(const ProblemSpec& lhs, const ProblemSpec& rhs);

struct Issue {
  std::string code;
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Issue> violations;
  std::vector<Issue> warnings;

  bool has_violation(std::string_view code) const;
  bool has_warning(std::string_view code) const;
};

struct RankCheck {
  int rank = 0;
  bool passes = false;
  // A depends on t, so the check used A(0) only.
  bool approximate = false;
};

ProblemSpec parse_problem(std::string_view text);
ProblemSpec load_problem(const std::string& path);
nlohmann::json to_json(const ProblemSpec& spec);
std::string serialize_problem(const ProblemSpec& spec);

ValidationReport validate_spec(const ProblemSpec& spec);

Matrix eval_A(const ProblemSpec& spec, double t);

/// Rank of [b, Ab, ..., A^{m-1}b] with A replaced by -A(0), for one channel.
/// A necessary-condition stand-in for Conti's condition, never a proof of it.
RankCheck kalman_rank_check(const ProblemSpec& spec, int channel);

}  // namespace chronotact
