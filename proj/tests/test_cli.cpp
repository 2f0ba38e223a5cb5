#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "oracles.hpp"

#include "chw/cli.hpp"
#include "chw/poisson_solver.hpp"
#include "chw/stopping_lab.hpp"

using namespace chw;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kExperiments = CHW_EXPERIMENTS_DIR;

fs::path scratch_root() {
  static const fs::path root = [] {
    const fs::path p = fs::temp_directory_path() / ("chw_test_cli_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path write_config(const std::string& name, const json& j) {
  const fs::path p = scratch_root() / (name + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

// Runs the real executable; output goes to a log next to the run.
int run_binary(const std::string& args) {
  const std::string cmd = std::string("\"") + CHW_CLI_PATH + "\" " + args + " > \"" +
                          (scratch_root() / "last.log").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_inproc(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  std::vector<std::string> argv = {"chwalk"};
  argv.insert(argv.end(), args.begin(), args.end());
  return run_cli(argv, out, err);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

const json kFigure1System = {{"m", 3}, {"N", 1}, {"xi", {{"kind", "affine"}, {"params", {{"a", -1}, {"b", 2}}}}}};

// Small configs for every command, used by the determinism checks.
std::vector<std::pair<std::string, json>> small_configs() {
  return {
      {"simulate", {{"system", kFigure1System}, {"x0", 0.5}, {"steps", 3000}}},
      {"encode", {{"mode", "rational"}, {"m", 2}, {"N", 2}, {"length", 8}, {"points", {"0", "1/3", "5/8"}}}},
      {"poisson",
       {{"m", 2}, {"N", 4}, {"xi", {{"kind", "affine"}, {"params", {{"a", -1}, {"b", 2}}}}},
        {"martingale", {{"trials", 500}, {"horizon", 20}}}, {"growth", {{"N_first", 2}, {"N_last", 5}}}}},
      {"escape",
       {{"walk", {{"m", 2}, {"N", 1}, {"preset", "srw"}, {"increments", "xi"}}},
        {"interval", {{"A", -3}, {"B", 4}}}, {"alpha_list", {0.0, 0.1}}, {"trials", 2000}, {"horizon", 10000},
        {"oracle", true}}},
      {"scaling",
       {{"m", 2}, {"N", 1}, {"preset", "srw"}, {"alphas", {0.1, 0.2}}, {"A", -10}, {"B", 3},
        {"zero_drift_A", {-5, -10}}, {"trials", 300}, {"horizon", 20000}, {"negative_alphas", {-0.2}},
        {"stay_horizon", 2000}}},
      {"birkhoff",
       {{"system", kFigure1System}, {"x0", 0.5}, {"U", {0.01, 0.99}}, {"n", 5000}, {"samples", 5},
        {"episodes", {{"epsilon", 0.01}}},
        {"census", {{"p", 0.5}, {"x_start", 0.001}, {"trials", 50}, {"horizons", {100, 1000}}}}}},
      {"validate", {{"system", kFigure1System}, {"C", 1}, {"r0", 0.25}, {"lyapunov_samples", 2000}}},
  };
}

}  // namespace

TEST_CASE("exit codes") {
  const auto good = write_config("good_poisson", {{"m", 2}, {"N", 2}, {"preset", "srw"}});
  const auto out = scratch_root() / "exit";
  CHECK(run_binary("poisson --config \"" + good.string() + "\" --out \"" + out.string() + "\"") == kExitOk);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(run_binary("--help") == kExitOk);
  CHECK(run_binary("--version") == kExitOk);
  CHECK(run_binary("poisson") == kExitUsage);
  CHECK(run_binary("frobnicate --config \"" + good.string() + "\"") == kExitUsage);
  CHECK(run_binary("poisson --config \"" + good.string() + "\" --bogus 1") == kExitUsage);
  CHECK(run_binary("poisson --config \"" + good.string() + "\" --mode decimal") == kExitUsage);
  CHECK(run_binary("poisson --config /nonexistent/config.json") == kExitUsage);

  const auto missing = write_config("missing_walk", {{"trials", 10}, {"horizon", 10}, {"A", -1}, {"B", 1}});
  CHECK(run_binary("escape --config \"" + missing.string() + "\" --out \"" + (scratch_root() / "missing").string() + "\"") ==
        kExitUsage);

  const json violating = {{"system", {{"m", 3}, {"N", 1}, {"xi", {{"kind", "affine"}, {"params", {{"a", -1}, {"b", 2}}}}},
                                      {"r", {{"kind", "cubic"}, {"rho", 10}}}}},
                          {"x0", 0.5}, {"steps", 10}};
  const auto vpath = write_config("violating", violating);
  const auto vout = scratch_root() / "violating";
  CHECK(run_binary("simulate --config \"" + vpath.string() + "\" --out \"" + vout.string() + "\"") == kExitFailure);
  CHECK(fs::exists(vout / "validation.json"));
  CHECK_FALSE(fs::exists(vout / "timeseries.csv"));
  CHECK(read_json(vout / "manifest.json").at("exit_code") == kExitFailure);
}

TEST_CASE("every command reruns bitwise identically across thread counts") {
  for (const auto& [command, config] : small_configs()) {
    INFO(command);
    const auto path = write_config("det_" + command, config);
    const auto a = scratch_root() / ("det_" + command + "_a");
    const auto b = scratch_root() / ("det_" + command + "_b");
    const auto c = scratch_root() / ("det_" + command + "_c");
    REQUIRE(run_inproc({command, "--config", path.string(), "--out", a.string(), "--threads", "1"}) == kExitOk);
    REQUIRE(run_inproc({command, "--config", path.string(), "--out", b.string(), "--threads", "3"}) == kExitOk);
    REQUIRE(run_inproc({command, "--config", (a / "manifest.json").string(), "--out", c.string(), "--threads", "2"}) ==
            kExitOk);
    const json manifest = read_json(a / "manifest.json");
    REQUIRE(manifest.at("outputs").size() >= 1);
    for (const auto& name : manifest.at("outputs")) {
      const std::string file = name.get<std::string>();
      INFO(file);
      const std::string reference = slurp(a / file);
      CHECK_FALSE(reference.empty());
      CHECK(slurp(b / file) == reference);
      CHECK(slurp(c / file) == reference);
    }
    CHECK(slurp(b / "manifest.json") == slurp(a / "manifest.json"));
    CHECK(manifest.at("config_hash").get<std::string>().size() == 16);
  }
}

TEST_CASE("the seed flag changes stochastic outputs") {
  const auto path = write_config("seeded", small_configs()[0].second);
  const auto a = scratch_root() / "seed_a", b = scratch_root() / "seed_b";
  REQUIRE(run_inproc({"simulate", "--config", path.string(), "--out", a.string(), "--seed", "1"}) == kExitOk);
  REQUIRE(run_inproc({"simulate", "--config", path.string(), "--out", b.string(), "--seed", "2"}) == kExitOk);
  CHECK(slurp(a / "timeseries.csv") != slurp(b / "timeseries.csv"));
  CHECK(read_json(b / "manifest.json").at("seed") == 2);
}

TEST_CASE("simulate") {
  SUBCASE("zero displacement is constant") {
    const auto path = write_config("sim_zero", {{"system", {{"m", 2}, {"N", 1}, {"xi", {{"kind", "zero"}}}}}, {"x0", 0.25}, {"steps", 500}});
    const auto out = scratch_root() / "sim_zero";
    REQUIRE(run_inproc({"simulate", "--config", path.string(), "--out", out.string()}) == kExitOk);
    const auto rows = read_csv(out / "timeseries.csv");
    REQUIRE(rows.size() == 502);
    CHECK(rows[0] == std::vector<std::string>{"step", "x_interval", "x_line"});
    for (std::size_t k = 1; k < rows.size(); ++k) CHECK(rows[k][1] == "0.25");
  }
  SUBCASE("Figure 1 config spends its time near the endpoints") {
    const auto out = scratch_root() / "figure1";
    REQUIRE(run_binary("simulate --config \"" + (kExperiments / "figure1.json").string() + "\" --out \"" + out.string() + "\"") ==
            kExitOk);
    const auto rows = read_csv(out / "timeseries.csv");
    std::size_t near = 0;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      const double x = std::stod(rows[k][1]);
      near += x <= 1e-3 || x >= 1 - 1e-3;
    }
    CHECK(static_cast<double>(near) / static_cast<double>(rows.size() - 1) > 0.3);
  }
}

TEST_CASE("poisson figure configs") {
  SUBCASE("Figure 3 equals the closed form") {
    const auto out = scratch_root() / "figure3";
    REQUIRE(run_inproc({"poisson", "--config", (kExperiments / "figure3.json").string(), "--out", out.string()}) == kExitOk);
    const auto rows = read_csv(out / "delta_exact.csv");
    const auto closed = srw_delta_closed_form(10);
    REQUIRE(rows.size() == 1025);
    for (std::size_t i = 0; i < closed.size(); ++i) {
      CHECK(rows[i + 1][0] == std::to_string(i + 1));
      CHECK(rows[i + 1][1] == std::to_string(closed[i]));
    }
  }
  SUBCASE("Figure 4 is antisymmetric under index reversal") {
    const auto out = scratch_root() / "figure4";
    REQUIRE(run_inproc({"poisson", "--config", (kExperiments / "figure4.json").string(), "--out", out.string()}) == kExitOk);
    const auto rows = read_csv(out / "delta.csv");
    REQUIRE(rows.size() == 1025);
    double worst = 0.0;
    for (std::size_t i = 1; i <= 1024; ++i)
      worst = std::max(worst, std::fabs(std::stod(rows[i][1]) + std::stod(rows[1025 - i][1])));
    CHECK(worst < 1e-9);
    CHECK(read_json(out / "bounds.json").at("residual").get<double>() < 1e-10);
  }
  SUBCASE("two-state chain from an explicit matrix") {
    const auto out = scratch_root() / "two_state";
    REQUIRE(run_inproc({"poisson", "--config", (kExperiments / "example_chain.json").string(), "--out", out.string()}) ==
            kExitOk);
    const auto rows = read_csv(out / "delta_exact.csv");
    CHECK(rows[1][1] == "-1/3");
    CHECK(rows[2][1] == "2/3");
  }
}

TEST_CASE("scaling reproduces the library table") {
  const json cfg = {{"seed", 5}, {"m", 2}, {"N", 1}, {"preset", "srw"}, {"alphas", {0.1, 0.2}}, {"A", -10}, {"B", 3},
                    {"zero_drift_A", {-5, -10}}, {"trials", 300}, {"horizon", 20000}};
  const auto path = write_config("scaling_lib", cfg);
  const auto out = scratch_root() / "scaling_lib";
  REQUIRE(run_inproc({"scaling", "--config", path.string(), "--out", out.string()}) == kExitOk);
  ScalingOptions opts;
  opts.alphas = {0.1, 0.2};
  opts.A = -10;
  opts.B = 3;
  opts.zero_drift_A = {-5, -10};
  opts.trials = 300;
  opts.horizon = 20000;
  opts.seed = 5;
  const auto table = drift_scaling_experiment(solve_poisson_canonical({1.0, -1.0}, 2, 1), opts);
  const json summary = read_json(out / "scaling.json");
  json lib = table.to_json();
  for (const auto& key : {"drift_rows", "zero_drift_rows"}) CHECK(summary.at(key) == lib.at(key));
}

TEST_CASE("validate the Figure 2 system") {
  const auto out = scratch_root() / "validate2";
  const auto cfg = read_json(kExperiments / "validate_figure2.json");
  json small = cfg;
  small["lyapunov_samples"] = 2000;
  const auto path = write_config("validate2", small);
  REQUIRE(run_inproc({"validate", "--config", path.string(), "--out", out.string()}) == kExitOk);
  const json report = read_json(out / "validation.json");
  CHECK(report.at("passed") == true);
}

TEST_CASE("escape oracle output") {
  const auto cfg = small_configs()[3].second;
  const auto path = write_config("escape_oracle", cfg);
  const auto out = scratch_root() / "escape_oracle";
  REQUIRE(run_inproc({"escape", "--config", path.string(), "--out", out.string(), "--mode", "rational"}) == kExitOk);
  const json oracle = read_json(out / "oracle.json");
  // symmetric walk on (-3, 4) from 0: p_left = 4/7, E[T] = 12
  CHECK(oracle.at("rows").at(0).at("p_left") == "4/7");
  CHECK(oracle.at("rows").at(0).at("expected_time") == "12");
  const auto rows = read_csv(out / "escape.csv");
  CHECK(rows.size() == 3);
}
