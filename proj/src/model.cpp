#include "chronotact/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chronotact/error.hpp"

namespace chronotact {

using nlohmann::json;

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSyntax: return "SyntaxError";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kToleranceNotMet: return "ToleranceNotMet";
    case ErrorCode::kMaxIterations: return "MaxIterations";
    case ErrorCode::kDegenerateDual: return "DegenerateDual";
    case ErrorCode::kDegeneratePairing: return "DegeneratePairing";
    case ErrorCode::kMonotonicity: return "MonotonicityError";
    case ErrorCode::kHorizonExhausted: return "HorizonExhausted";
    case ErrorCode::kVerificationFailed: return "VerificationFailed";
    case ErrorCode::kSingularGramian: return "SingularGramian";
    case ErrorCode::kOracleBudgetExceeded: return "OracleBudgetExceeded";
    case ErrorCode::kOracleInfeasible: return "OracleInfeasible";
    case ErrorCode::kNumerical: return "NumericalError";
  }
  return "UnknownError";
}

double EntryExpression::operator()(double t) const {
  double sum = 0.0;
  for (const auto& term : terms) {
    if (const auto* poly = std::get_if<PolyTerm>(&term)) {
      double acc = 0.0;
      for (auto it = poly->coeffs.rbegin(); it != poly->coeffs.rend(); ++it) {
        acc = acc * t + *it;
      }
      sum += acc;
    } else {
      const auto& s = std::get<SinusoidTerm>(term);
      const double arg = s.omega * t + s.phase;
      sum += s.amplitude *
             (s.kind == SinusoidKind::kSin ? std::sin(arg) : std::cos(arg));
    }
  }
  return sum;
}

bool EntryExpression::is_constant() const {
  for (const auto& term : terms) {
    if (const auto* poly = std::get_if<PolyTerm>(&term)) {
      for (std::size_t i = 1; i < poly->coeffs.size(); ++i) {
        if (poly->coeffs[i] != 0.0) return false;
      }
    } else {
      const auto& s = std::get<SinusoidTerm>(term);
      if (s.omega != 0.0 && s.amplitude != 0.0) return false;
    }
  }
  return true;
}

EntryExpression EntryExpression::constant(double value) {
  return EntryExpression{{PolyTerm{{value}}}};
}

Matrix ProblemSpec::input_matrix() const {
  Matrix B(m, d);
  for (int i = 0; i < d; ++i) B.col(i) = b[i];
  return B;
}

bool ProblemSpec::is_time_invariant() const {
  for (const auto& row : A) {
    for (const auto& entry : row) {
      if (!entry.is_constant()) return false;
    }
  }
  return true;
}

bool operator==(const ProblemSpec& lhs, const ProblemSpec& rhs) {
  if (lhs.m != rhs.m || lhs.d != rhs.d || lhs.A != rhs.A || lhs.k != rhs.k ||
      lhs.b.size() != rhs.b.size() || lhs.y0 != rhs.y0) {
    return false;
  }
  for (std::size_t i = 0; i < lhs.b.size(); ++i) {
    if (lhs.b[i] != rhs.b[i]) return false;
  }
  return true;
}

bool ValidationReport::has_violation(std::string_view code) const {
  for (const auto& v : violations) {
    if (v.code == code) return true;
  }
  return false;
}

bool ValidationReport::has_warning(std::string_view code) const {
  for (const auto& w : warnings) {
    if (w.code == code) return true;
  }
  return false;
}

namespace {

[[noreturn]] void schema_error(const std::string& message) {
  throw Error(ErrorCode::kSchema, message);
}

const json& require(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) schema_error(std::string("missing field '") + key + "'");
  return *it;
}

double as_number(const json& value, const std::string& where) {
  if (!value.is_number()) schema_error(where + " must be a number");
  return value.get<double>();
}

int as_positive_int(const json& value, const char* key) {
  if (!value.is_number_integer() || value.get<long long>() <= 0) {
    schema_error(std::string("'") + key + "' must be a positive integer");
  }
  return value.get<int>();
}

Vector as_vector(const json& value, int size, const std::string& where) {
  if (!value.is_array() || static_cast<int>(value.size()) != size) {
    schema_error(where + " must be an array of length " + std::to_string(size));
  }
  Vector v(size);
  for (int i = 0; i < size; ++i) {
    v[i] = as_number(value[i], where + "[" + std::to_string(i) + "]");
  }
  return v;
}

Term parse_term(const json& doc, const std::string& where) {
  if (!doc.is_object()) schema_error(where + " must be an object");
  const auto& kind = require(doc, "kind");
  if (!kind.is_string()) schema_error(where + ".kind must be a string");
  const auto name = kind.get<std::string>();
  if (name == "poly") {
    const auto& coeffs = require(doc, "coeffs");
    if (!coeffs.is_array()) schema_error(where + ".coeffs must be an array");
    PolyTerm poly;
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      poly.coeffs.push_back(
          as_number(coeffs[i], where + ".coeffs[" + std::to_string(i) + "]"));
    }
    return poly;
  }
  if (name == "sin" || name == "cos") {
    SinusoidTerm s;
    s.kind = name == "sin" ? SinusoidKind::kSin : SinusoidKind::kCos;
    s.amplitude = as_number(require(doc, "amplitude"), where + ".amplitude");
    s.omega = as_number(require(doc, "omega"), where + ".omega");
    s.phase = as_number(require(doc, "phase"), where + ".phase");
    return s;
  }
  schema_error(where + ".kind must be one of poly, sin, cos");
}

EntryExpression parse_entry(const json& doc, const std::string& where) {
  if (doc.is_number()) return EntryExpression::constant(doc.get<double>());
  if (!doc.is_object()) schema_error(where + " must be a number or an object");
  const auto& terms = require(doc, "terms");
  if (!terms.is_array()) schema_error(where + ".terms must be an array");
  EntryExpression entry;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    entry.terms.push_back(
        parse_term(terms[i], where + ".terms[" + std::to_string(i) + "]"));
  }
  return entry;
}

json term_to_json(const Term& term) {
  if (const auto* poly = std::get_if<PolyTerm>(&term)) {
    return json{{"kind", "poly"}, {"coeffs", poly->coeffs}};
  }
  const auto& s = std::get<SinusoidTerm>(term);
  return json{{"kind", s.kind == SinusoidKind::kSin ? "sin" : "cos"},
              {"amplitude", s.amplitude},
              {"omega", s.omega},
              {"phase", s.phase}};
}

std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

ProblemSpec parse_problem(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSyntax, e.what());
  }
  if (!doc.is_object()) schema_error("problem document must be an object");

  ProblemSpec spec;
  spec.m = as_positive_int(require(doc, "m"), "m");
  spec.d = as_positive_int(require(doc, "d"), "d");

  const auto& a = require(doc, "A");
  if (!a.is_array() || static_cast<int>(a.size()) != spec.m) {
    schema_error("A must have m rows");
  }
  spec.A.resize(spec.m);
  for (int r = 0; r < spec.m; ++r) {
    const auto& row = a[r];
    if (!row.is_array() || static_cast<int>(row.size()) != spec.m) {
      schema_error("A row " + std::to_string(r) + " must have m entries");
    }
    for (int c = 0; c < spec.m; ++c) {
      spec.A[r].push_back(parse_entry(
          row[c], "A[" + std::to_string(r) + "][" + std::to_string(c) + "]"));
    }
  }

  const auto& b = require(doc, "b");
  if (!b.is_array() || static_cast<int>(b.size()) != spec.d) {
    schema_error("b must hold d vectors");
  }
  for (int i = 0; i < spec.d; ++i) {
    spec.b.push_back(as_vector(b[i], spec.m, "b[" + std::to_string(i) + "]"));
  }

  const auto& k = require(doc, "k");
  if (!k.is_array() || static_cast<int>(k.size()) != spec.d) {
    schema_error("k must hold d weights");
  }
  for (int i = 0; i < spec.d; ++i) {
    spec.k.push_back(as_number(k[i], "k[" + std::to_string(i) + "]"));
  }

  spec.y0 = as_vector(require(doc, "y0"), spec.m, "y0");
  return spec;
}

ProblemSpec load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_problem(buffer.str());
}

json to_json(const ProblemSpec& spec) {
  json a = json::array();
  for (const auto& row : spec.A) {
    json jrow = json::array();
    for (const auto& entry : row) {
      json terms = json::array();
      for (const auto& term : entry.terms) terms.push_back(term_to_json(term));
      jrow.push_back(json{{"terms", terms}});
    }
    a.push_back(jrow);
  }
  json b = json::array();
  for (const auto& col : spec.b) b.push_back(to_std(col));
  return json{{"m", spec.m}, {"d", spec.d}, {"A", a},
              {"b", b},      {"k", spec.k}, {"y0", to_std(spec.y0)}};
}

std::string serialize_problem(const ProblemSpec& spec) {
  return to_json(spec).dump(2);
}

ValidationReport validate_spec(const ProblemSpec& spec) {
  ValidationReport report;
  if (spec.y0.size() == 0 || spec.y0.norm() == 0.0) {
    report.violations.push_back({"Y0_ZERO", "initial state must be nonzero"});
  }
  if (!spec.k.empty() && spec.k.front() != 1.0) {
    report.violations.push_back({"K_FIRST", "first channel weight must be 1"});
  }
  for (std::size_t i = 0; i < spec.k.size(); ++i) {
    const bool broken =
        !(spec.k[i] > 0.0) || (i > 0 && spec.k[i] > spec.k[i - 1]);
    if (broken) {
      report.violations.push_back(
          {"K_ORDER", "weights must satisfy k[0] >= k[1] >= ... > 0 (index " +
                          std::to_string(i) + ")"});
      break;
    }
  }
  if (report.violations.empty()) {
    for (int i = 0; i < spec.d; ++i) {
      const auto rank = kalman_rank_check(spec, i);
      if (!rank.passes) {
        report.warnings.push_back(
            {"CONTI_HEURISTIC_FAIL",
             "channel " + std::to_string(i) + " has controllability rank " +
                 std::to_string(rank.rank) + " < m"});
      } else if (rank.approximate) {
        report.warnings.push_back(
            {"CONTI_HEURISTIC_SAMPLED",
             "channel " + std::to_string(i) +
                 ": A depends on t, rank checked at t = 0 only"});
      }
    }
  }
  report.ok = report.violations.empty();
  return report;
}

Matrix eval_A(const ProblemSpec& spec, double t) {
  Matrix a(spec.m, spec.m);
  for (int r = 0; r < spec.m; ++r) {
    for (int c = 0; c < spec.m; ++c) a(r, c) = spec.A[r][c](t);
  }
  return a;
}

RankCheck kalman_rank_check(const ProblemSpec& spec, int channel) {
  if (channel < 0 || channel >= spec.d) {
    throw Error(ErrorCode::kInvalidArgument, "channel out of range");
  }
  const Matrix a_hat = -eval_A(spec, 0.0);
  Matrix block(spec.m, spec.m);
  block.col(0) = spec.b[channel];
  for (int j = 1; j < spec.m; ++j) block.col(j) = a_hat * block.col(j - 1);

  Eigen::ColPivHouseholderQR<Matrix> qr(block);
  qr.setThreshold(1e-10);
  RankCheck out;
  out.rank = block.isZero(0.0) ? 0 : static_cast<int>(qr.rank());
  out.passes = out.rank == spec.m;
  out.approximate = !spec.is_time_invariant();
  return out;
}

}  // namespace chronotact
