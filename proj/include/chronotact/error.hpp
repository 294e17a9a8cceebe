#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chronotact {

enum class ErrorCode {
  kSyntax,
  kSchema,
  kInvalidArgument,
  kToleranceNotMet,
  kMaxIterations,
  kDegenerateDual,
  kDegeneratePairing,
  kMonotonicity,
  kHorizonExhausted,
  kVerificationFailed,
  kSingularGramian,
  kOracleBudgetExceeded,
  kOracleInfeasible,
  kNumerical,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Input errors map to a different CLI exit status than solver failures.
  bool is_input_error() const noexcept {
    return code_ == ErrorCode::kSyntax || code_ == ErrorCode::kSchema ||
           code_ == ErrorCode::kInvalidArgument;
  }

 private:
  ErrorCode code_;
};

}  // namespace chronotact
