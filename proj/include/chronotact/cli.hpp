#pragma once

#include <iosfwd>
#include <optional>
#include <string>

namespace chronotact::cli {

enum class Command { kSolveTime, kSolveNorm, kCurve, kSteer, kVerify };

// Exit status contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitReject = 2;
inline constexpr int kExitSolverError = 3;
inline constexpr int kExitInputError = 4;

struct RunConfig {
  Command command = Command::kSolveTime;
  std::string problem_path;
  std::string out_dir = ".";
  std::optional<double> M;
  std::optional<double> T;
  double t0 = 1.0;
  std::optional<double> tol_time;
  std::optional<double> tol_m;
  std::optional<double> T_min;
  std::optional<double> T_max;
  int samples = 0;
  double tau = 0.0;
  int channel = 0;
  // verify: result.json holding switch_times, initial_signs and levels.
  std::string control_path;
  bool csv = true;
  bool json = true;
  // Worker threads for curve; 0 = sequential.
  unsigned threads = 0;
  // Set instead of a command when --help was requested.
  std::string help;
};

/// Parses argv with the first positional argument as the command. Throws
/// Error(kInvalidArgument) on unknown commands or malformed flags. Reads
/// CHRONOTACT_THREADS from the environment.
RunConfig parse_command_line(int argc, const char* const* argv);

/// Runs one command, writing artifacts under config.out_dir. Errors are
/// reported on `err` and mapped to the exit codes above.
int dispatch(const RunConfig& config, std::ostream& err);

/// parse_command_line followed by dispatch.
int run(int argc, const char* const* argv, std::ostream& err);

}  // namespace chronotact::cli
