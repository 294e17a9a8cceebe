#include "chronotact/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chronotact/steering.hpp"
#include "chronotact/timeopt.hpp"

namespace chronotact::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<std::string, Command>& command_names() {
  static const std::map<std::string, Command> names{
      {"solve-time", Command::kSolveTime}, {"solve-norm", Command::kSolveNorm},
      {"curve", Command::kCurve},          {"steer", Command::kSteer},
      {"verify", Command::kVerify}};
  return names;
}

std::string_view command_name(Command command) {
  for (const auto& [name, value] : command_names()) {
    if (value == command) return name;
  }
  return "?";
}

Error input_error(const std::string& message) {
  return Error(ErrorCode::kInvalidArgument, message);
}

double require(const std::optional<double>& value, const char* flag) {
  if (!value) throw input_error(std::string("missing required option ") + flag);
  return *value;
}

std::ofstream open_output(const RunConfig& config, const std::string& name) {
  std::ofstream out(fs::path(config.out_dir) / name);
  if (!out) throw input_error("cannot write " + (fs::path(config.out_dir) / name).string());
  return out;
}

void write_json(const RunConfig& config, const std::string& name, const json& payload) {
  if (!config.json) return;
  auto out = open_output(config, name);
  out << payload.dump(2) << '\n';
}

json control_json(const BangBangControl& control) {
  json switches = json::array();
  json signs = json::array();
  json levels = json::array();
  for (const auto& channel : control.channels) {
    switches.push_back(channel.switch_times);
    signs.push_back(channel.initial_sign);
    levels.push_back(channel.level);
  }
  return {{"switch_times", switches}, {"initial_signs", signs}, {"levels", levels}};
}

BangBangControl control_from_json(const json& j, double T, int d) {
  try {
    const auto& switches = j.at("switch_times");
    const auto& signs = j.at("initial_signs");
    const auto& levels = j.at("levels");
    if (static_cast<int>(switches.size()) != d || static_cast<int>(signs.size()) != d ||
        static_cast<int>(levels.size()) != d) {
      throw Error(ErrorCode::kSchema, "control arrays must have one entry per channel");
    }
    BangBangControl control;
    control.T = T;
    control.provenance = Provenance::kManual;
    for (int i = 0; i < d; ++i) {
      BangBangChannel channel;
      channel.level = levels[i].get<double>();
      channel.initial_sign = signs[i].get<int>() >= 0 ? 1 : -1;
      channel.switch_times = switches[i].get<std::vector<double>>();
      control.channels.push_back(std::move(channel));
    }
    return control;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("control file: ") + e.what());
  }
}

json report_json(const OptimalityReport& report) {
  return {{"eq27_ok", report.eq27_ok},
          {"eq27_max_dev", report.eq27_max_dev},
          {"eq28_residual", report.eq28_residual},
          {"terminal_residual", report.terminal_residual},
          {"el_residual", report.el_residual},
          {"bangbang_ok", report.bangbang_ok},
          {"samples", report.samples},
          {"notes", report.notes},
          {"verdict", report.accept ? "accept" : "reject"}};
}

void write_primal(const RunConfig& config, const ProblemSpec& spec,
                  const BangBangControl& control, double T) {
  if (!config.csv) return;
  {
    auto out = open_output(config, "control.csv");
    write_control_csv(out, control);
  }
  auto out = open_output(config, "trajectory.csv");
  write_trajectory_csv(out, propagate_primal(spec, spec.y0, control, T));
}

ProblemSpec load_valid(const RunConfig& config) {
  if (config.problem_path.empty()) throw input_error("missing required option --problem");
  auto spec = load_problem(config.problem_path);
  const auto report = validate_spec(spec);
  if (!report.ok) {
    throw input_error("problem fails validation: " + report.violations.front().message);
  }
  return spec;
}

int solve_time(const RunConfig& config, const ProblemSpec& spec) {
  const double M = require(config.M, "--M");
  TimeOptOptions opts;
  opts.t0 = config.t0;
  if (config.tol_time) opts.tol_T = *config.tol_time;
  if (config.tol_m) opts.tol_M = *config.tol_m;
  opts.throw_on_reject = false;
  const auto result = solve_time_optimal(spec, M, opts);
  const auto& report = *result.verification;

  json trace = json::array();
  for (const auto& e : result.trace.entries) {
    trace.push_back({{"n", e.n}, {"t", e.t}, {"M_tilde", e.M_tilde}, {"a", e.a}, {"b", e.b}});
  }
  json payload = {{"M", result.M},
                  {"t_star", result.t_star},
                  {"K", result.trace.K},
                  {"t0", result.trace.t0},
                  {"trace", trace}};
  payload.update(control_json(result.control));
  payload["verification"] = report_json(report);
  write_json(config, "result.json", payload);

  write_primal(config, spec, result.control, result.t_star);
  if (config.csv) {
    auto out = open_output(config, "trace.csv");
    out << "n,t,M_tilde,a,b\n" << std::setprecision(17);
    for (const auto& e : result.trace.entries) {
      out << e.n << ',' << e.t << ',' << e.M_tilde << ',' << e.a << ',' << e.b << '\n';
    }
  }
  return report.accept ? kExitOk : kExitReject;
}

int solve_norm(const RunConfig& config, const ProblemSpec& spec) {
  const double T = require(config.T, "--T");
  if (!(T > 0.0)) throw input_error("--T must be > 0");
  const auto result = synthesize_norm_optimal(spec, T);
  json payload = {{"T", T},
                  {"M_tilde", result.M_tilde},
                  {"phi_hat_T", std::vector<double>(result.minimizer.phi_hat_T.begin(),
                                                    result.minimizer.phi_hat_T.end())},
                  {"J_value", result.minimizer.J_value},
                  {"el_residual", result.minimizer.el_residual},
                  {"terminal_residual", result.terminal_residual},
                  {"warnings", result.warnings}};
  payload.update(control_json(result.control));
  write_json(config, "result.json", payload);
  write_primal(config, spec, result.control, T);
  return kExitOk;
}

int curve(const RunConfig& config, const ProblemSpec& spec) {
  const double lo = require(config.T_min, "--T-min");
  const double hi = require(config.T_max, "--T-max");
  if (!(lo > 0.0 && hi > lo)) throw input_error("need 0 < T-min < T-max");
  if (config.samples < 2) throw input_error("--samples must be >= 2");
  std::vector<double> horizons;
  const int n = config.samples;
  for (int j = 0; j < n; ++j) {
    horizons.push_back(j == n - 1 ? hi : lo * std::pow(hi / lo, double(j) / (n - 1)));
  }
  SynthesisOptions opts;
  opts.check_terminal = false;
  const auto points = mtilde_curve(spec, horizons, opts, config.threads);
  if (config.csv) {
    auto out = open_output(config, "mtilde.csv");
    out << "T,M_tilde\n" << std::setprecision(17);
    for (const auto& p : points) out << p.T << ',' << p.M_tilde << '\n';
  }
  return kExitOk;
}

int steer(const RunConfig& config, const ProblemSpec& spec) {
  const double T = require(config.T, "--T");
  const auto result = steer_to_zero(spec, config.tau, T, spec.y0, config.channel);
  if (config.csv) {
    auto out = open_output(config, "steer.csv");
    write_control_csv(out, result.control);
  }
  json W = json::array();
  for (int r = 0; r < result.gramian.W.rows(); ++r) {
    W.push_back(std::vector<double>(result.gramian.W.row(r).begin(),
                                    result.gramian.W.row(r).end()));
  }
  write_json(config, "steer.json",
             {{"tau", config.tau},
              {"T", T},
              {"channel", result.channel},
              {"sup_norm", result.sup_norm},
              {"bound", result.bound},
              {"terminal_norm", result.terminal_norm},
              {"gramian", W},
              {"gramian_min_eigenvalue", result.gramian.min_eigenvalue}});
  return kExitOk;
}

int verify(const RunConfig& config, const ProblemSpec& spec) {
  if (config.control_path.empty()) throw input_error("missing required option --control");
  std::ifstream in(config.control_path);
  if (!in) throw input_error("cannot read " + config.control_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSyntax, std::string("control file: ") + e.what());
  }
  auto from_doc = [&](const std::optional<double>& flag, const char* key) {
    if (flag) return *flag;
    if (doc.contains(key) && doc[key].is_number()) return doc[key].get<double>();
    throw input_error(std::string("missing ") + key + " (flag or control file)");
  };
  const double M = from_doc(config.M, "M");
  const double t_star = from_doc(config.T, "t_star");
  const auto control = control_from_json(doc, t_star, spec.d);
  const auto report = check_time_optimality(spec, M, t_star, control);
  json payload = report_json(report);
  payload["M"] = M;
  payload["t_star"] = t_star;
  write_json(config, "report.json", payload);
  return report.accept ? kExitOk : kExitReject;
}

void log_run(const RunConfig& config, int status) {
  std::ofstream log(fs::path(config.out_dir) / "run.log", std::ios::app);
  if (!log) return;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  log << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ") << ' ' << command_name(config.command)
      << " problem=" << config.problem_path << " exit=" << status << '\n';
}

}  // namespace

RunConfig parse_command_line(int argc, const char* const* argv) {
  RunConfig config;
  CLI::App app{"chronotact: time- and norm-optimal bang-bang controls"};
  std::string command;
  double M = 0, T = 0, tol_time = 0, tol_m = 0, T_min = 0, T_max = 0;
  bool no_csv = false, no_json = false;
  app.add_option("command", command, "solve-time | solve-norm | curve | steer | verify")
      ->required();
  app.add_option("--problem", config.problem_path, "problem JSON file");
  app.add_option("--out", config.out_dir, "output directory");
  auto* m_opt = app.add_option("--M", M, "control bound");
  auto* t_opt = app.add_option("--T", T, "horizon (t_star for verify)");
  app.add_option("--t0", config.t0, "bisection horizon step");
  auto* tol_time_opt = app.add_option("--tol-time", tol_time, "bisection bracket tolerance");
  auto* tol_m_opt = app.add_option("--tol-m", tol_m, "early-exit tolerance on M_tilde");
  auto* tmin_opt = app.add_option("--T-min", T_min, "first curve horizon");
  auto* tmax_opt = app.add_option("--T-max", T_max, "last curve horizon");
  app.add_option("--samples", config.samples, "number of curve horizons");
  app.add_option("--tau", config.tau, "steering start time");
  app.add_option("--channel", config.channel, "steering channel");
  app.add_option("--control", config.control_path, "result.json to verify");
  app.add_flag("--no-csv", no_csv, "skip CSV artifacts");
  app.add_flag("--no-json", no_json, "skip JSON artifacts");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    config.help = app.help();
    return config;
  } catch (const CLI::ParseError& e) {
    throw input_error(e.what());
  }
  const auto it = command_names().find(command);
  if (it == command_names().end()) throw input_error("unknown command '" + command + "'");
  config.command = it->second;
  if (*m_opt) config.M = M;
  if (*t_opt) config.T = T;
  if (*tol_time_opt) config.tol_time = tol_time;
  if (*tol_m_opt) config.tol_m = tol_m;
  if (*tmin_opt) config.T_min = T_min;
  if (*tmax_opt) config.T_max = T_max;
  config.csv = !no_csv;
  config.json = !no_json;
  if (const char* env = std::getenv("CHRONOTACT_THREADS")) {
    try {
      config.threads = static_cast<unsigned>(std::stoul(env));
    } catch (const std::exception&) {
      throw input_error("CHRONOTACT_THREADS must be a non-negative integer");
    }
  }
  return config;
}

int dispatch(const RunConfig& config, std::ostream& err) {
  int status = kExitOk;
  try {
    fs::create_directories(config.out_dir);
    const auto spec = load_valid(config);
    switch (config.command) {
      case Command::kSolveTime: status = solve_time(config, spec); break;
      case Command::kSolveNorm: status = solve_norm(config, spec); break;
      case Command::kCurve: status = curve(config, spec); break;
      case Command::kSteer: status = steer(config, spec); break;
      case Command::kVerify: status = verify(config, spec); break;
    }
    if (status == kExitReject) err << "verification rejected the result\n";
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    status = e.is_input_error()                             ? kExitInputError
             : e.code() == ErrorCode::kVerificationFailed ? kExitReject
                                                          : kExitSolverError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    status = kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    status = kExitSolverError;
  }
  log_run(config, status);
  return status;
}

int run(int argc, const char* const* argv, std::ostream& err) {
  RunConfig config;
  try {
    config = parse_command_line(argc, argv);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  if (!config.help.empty()) {
    std::cout << config.help;
    return kExitOk;
  }
  return dispatch(config, err);
}

}  // namespace chronotact::cli
