#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chronotact/cli.hpp"
#include "chronotact/error.hpp"

namespace fs = std::filesystem;
using namespace chronotact::cli;
using nlohmann::json;

namespace {

const std::string kData = CHRONOTACT_DATA_DIR;

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("chronotact_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_args(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "chronotact");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream err;
  const int status = run(static_cast<int>(argv.size()), argv.data(), err);
  if (err_text) *err_text = err.str();
  return status;
}

std::vector<std::vector<double>> read_csv(const fs::path& path, std::string* header) {
  std::ifstream in(path);
  std::getline(in, *header);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST(Cli, SolveTimeScalar) {
  const auto dir = fresh_dir("solve_time");
  ASSERT_EQ(run_args({"solve-time", "--problem", kData + "/scalar.json", "--M", "1", "--out",
                      dir.string()}),
            kExitOk);
  for (const char* f : {"result.json", "control.csv", "trajectory.csv", "trace.csv", "run.log"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto result = json::parse(slurp(dir / "result.json"));
  EXPECT_NEAR(result["t_star"].get<double>(), 1.0, 1e-6);
  EXPECT_EQ(result["verification"]["verdict"], "accept");
  EXPECT_EQ(result["levels"][0].get<double>(), 1.0);
  for (const char* key : {"M", "t_star", "K", "t0", "trace", "switch_times", "initial_signs",
                          "levels", "verification"}) {
    EXPECT_TRUE(result.contains(key)) << key;
  }
  for (const char* key : {"eq27_ok", "eq28_residual", "terminal_residual", "el_residual"}) {
    EXPECT_TRUE(result["verification"].contains(key)) << key;
  }
}

TEST(Cli, JsonIsDeterministic) {
  const auto a = fresh_dir("det_a");
  const auto b = fresh_dir("det_b");
  for (const auto& dir : {a, b}) {
    ASSERT_EQ(run_args({"solve-time", "--problem", kData + "/double_integrator.json", "--M", "1",
                        "--out", dir.string()}),
              kExitOk);
  }
  EXPECT_EQ(slurp(a / "result.json"), slurp(b / "result.json"));
  EXPECT_EQ(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
}

TEST(Cli, CurveScalar) {
  const auto dir = fresh_dir("curve");
  ASSERT_EQ(run_args({"curve", "--problem", kData + "/scalar.json", "--T-min", "0.25", "--T-max",
                      "4", "--samples", "5", "--out", dir.string()}),
            kExitOk);
  std::string header;
  const auto rows = read_csv(dir / "mtilde.csv", &header);
  EXPECT_EQ(header, "T,M_tilde");
  ASSERT_EQ(rows.size(), 5u);
  const double Ts[] = {0.25, 0.5, 1, 2, 4};
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(rows[i][0], Ts[i], 1e-12);
    EXPECT_NEAR(rows[i][1], 1.0 / Ts[i], 1e-6);
  }
}

TEST(Cli, CsvRoundTripsExactly) {
  const auto dir = fresh_dir("csv");
  ASSERT_EQ(run_args({"solve-norm", "--problem", kData + "/double_integrator.json", "--T", "2",
                      "--out", dir.string()}),
            kExitOk);
  const auto result = json::parse(slurp(dir / "result.json"));
  const double s = result["switch_times"][0][0].get<double>();
  std::string header;
  const auto rows = read_csv(dir / "control.csv", &header);
  EXPECT_EQ(header, "t,u1");
  bool found = false;
  for (const auto& row : rows) found = found || row[0] == s;
  EXPECT_TRUE(found) << "switch time not reproduced bit-for-bit";
  const auto traj = read_csv(dir / "trajectory.csv", &header);
  EXPECT_EQ(header, "t,y1,y2");
  EXPECT_LE(std::abs(traj.back()[1]) + std::abs(traj.back()[2]), 1e-6);
}

TEST(Cli, Steer) {
  const auto dir = fresh_dir("steer");
  ASSERT_EQ(run_args({"steer", "--problem", kData + "/double_integrator.json", "--T", "2", "--tau",
                      "0", "--out", dir.string()}),
            kExitOk);
  const auto report = json::parse(slurp(dir / "steer.json"));
  EXPECT_LE(report["terminal_norm"].get<double>(), 1e-8);
  std::string header;
  EXPECT_GT(read_csv(dir / "steer.csv", &header).size(), 100u);
  EXPECT_EQ(header, "t,u1");
}

TEST(Cli, VerifyTamperedControl) {
  const auto dir = fresh_dir("verify");
  ASSERT_EQ(run_args({"solve-time", "--problem", kData + "/double_integrator.json", "--M", "1",
                      "--out", dir.string()}),
            kExitOk);
  EXPECT_EQ(run_args({"verify", "--problem", kData + "/double_integrator.json", "--control",
                      (dir / "result.json").string(), "--out", dir.string()}),
            kExitOk);
  EXPECT_EQ(json::parse(slurp(dir / "report.json"))["verdict"], "accept");

  auto result = json::parse(slurp(dir / "result.json"));
  result["levels"][0] = 1.1;
  const auto tampered = dir / "tampered.json";
  std::ofstream(tampered) << result.dump();
  std::string err;
  EXPECT_EQ(run_args({"verify", "--problem", kData + "/double_integrator.json", "--control",
                      tampered.string(), "--out", dir.string()},
                     &err),
            kExitReject);
  EXPECT_EQ(json::parse(slurp(dir / "report.json"))["verdict"], "reject");
  EXPECT_FALSE(err.empty());
}

TEST(Cli, ExitCodes) {
  const auto dir = fresh_dir("codes");
  std::string err;
  EXPECT_EQ(run_args({"solve-time", "--problem", "/nonexistent.json", "--M", "1", "--out",
                      dir.string()},
                     &err),
            kExitInputError);
  EXPECT_FALSE(err.empty());
  EXPECT_EQ(run_args({"solve-time", "--problem", kData + "/scalar.json", "--out", dir.string()}),
            kExitInputError);
  EXPECT_EQ(run_args({"launch", "--problem", kData + "/scalar.json"}), kExitInputError);
  EXPECT_EQ(run_args({"solve-time", "--problem", kData + "/scalar.json", "--M", "1e-9", "--out",
                      dir.string()},
                     &err),
            kExitSolverError);
  EXPECT_NE(err.find("HorizonExhausted"), std::string::npos);
}

TEST(Cli, NoJsonNoCsv) {
  const auto dir = fresh_dir("quiet");
  ASSERT_EQ(run_args({"solve-norm", "--problem", kData + "/scalar.json", "--T", "1", "--no-csv",
                      "--no-json", "--out", dir.string()}),
            kExitOk);
  EXPECT_FALSE(fs::exists(dir / "result.json"));
  EXPECT_FALSE(fs::exists(dir / "control.csv"));
  EXPECT_TRUE(fs::exists(dir / "run.log"));
}

TEST(Cli, ParsesFlags) {
  const char* argv[] = {"chronotact", "curve",    "--problem", "p.json", "--T-min",
                        "0.5",        "--T-max",  "3",         "--samples", "7",
                        "--tol-time", "1e-7",     "--tol-m",   "1e-8"};
  const auto config = parse_command_line(14, argv);
  EXPECT_EQ(config.command, Command::kCurve);
  EXPECT_EQ(config.problem_path, "p.json");
  EXPECT_DOUBLE_EQ(*config.T_min, 0.5);
  EXPECT_DOUBLE_EQ(*config.T_max, 3.0);
  EXPECT_EQ(config.samples, 7);
  EXPECT_DOUBLE_EQ(*config.tol_time, 1e-7);
  EXPECT_DOUBLE_EQ(*config.tol_m, 1e-8);
  EXPECT_FALSE(config.M.has_value());
  EXPECT_TRUE(config.csv);
}
