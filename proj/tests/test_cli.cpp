#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "selo/experiment.hpp"

using namespace selo;
namespace fs = std::filesystem;

namespace {

const std::string kCli = SELO_CLI_PATH;
const std::string kDc = SELO_CONFIG_DIR "/dc.json";
const std::string kSmoke = SELO_CONFIG_DIR "/smoke.json";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::current_path() / "cli_scratch" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Runs the CLI with stdout and stderr captured into `dir`; returns the exit code.
int cli(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + kCli + "\" " + args + " > \"" +
                          (dir / "stdout.txt").string() + "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') {
        quoted = !quoted;
      } else if (c == ',' && !quoted) {
        fields.push_back(field);
        field.clear();
      } else {
        field += c;
      }
    }
    fields.push_back(field);
    rows.push_back(fields);
  }
  return rows;
}

int column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  FAIL("missing column " << name);
  return -1;
}

// Every nonempty cell outside the text columns parses as a finite number.
void check_numeric_cells_finite(const std::vector<std::vector<std::string>>& rows, int text_columns) {
  for (std::size_t r = 1; r < rows.size(); ++r) {
    for (std::size_t c = static_cast<std::size_t>(text_columns); c < rows[r].size(); ++c) {
      if (rows[r][c].empty()) continue;
      std::size_t used = 0;
      const double v = std::stod(rows[r][c], &used);
      CHECK(used == rows[r][c].size());
      CHECK(std::isfinite(v));
    }
  }
}

Json read_json(const fs::path& path) { return Json::parse(slurp(path)); }

}  // namespace

TEST_CASE("run writes one trace row per round, reproducibly") {
  const fs::path a = scratch("run_a");
  const fs::path b = scratch("run_b");
  const std::string args = "run --config " + kDc + " --algo selo --seed 1 --horizon 720 --output-dir ";
  REQUIRE(cli(args + a.string(), a) == 0);
  REQUIRE(cli(args + b.string(), b) == 0);

  const fs::path trace = a / "trace_selo_1_720.csv";
  const auto rows = read_csv(trace);
  REQUIRE(rows.size() == 721);
  CHECK(rows[0] == std::vector<std::string>{"t", "phase", "loss", "cost_1", "Q_1", "ghat_1"});
  CHECK(rows[1][0] == "1");
  CHECK(rows[720][0] == "720");
  check_numeric_cells_finite(rows, 2);
  CHECK(slurp(trace) == slurp(b / "trace_selo_1_720.csv"));

  const Json summary = read_json(a / "summary.json");
  CHECK(summary["schema_version"] == 1);
  CHECK(summary["stop_time"] == 720);
  CHECK(summary["violation"][0].get<double>() == 0.0);
}

TEST_CASE("emit-decisions adds the decision columns") {
  const fs::path dir = scratch("run_emit");
  REQUIRE(cli("run --config " + kSmoke + " --horizon 200 --emit-decisions --output-dir " + dir.string(), dir) == 0);
  const auto rows = read_csv(dir / "trace_selo_1_200.csv");
  CHECK(rows[0].back() == "x_2");
  CHECK(rows.size() == 201);
}

TEST_CASE("hard mode with a tiny budget stops early") {
  const fs::path dir = scratch("run_hard");
  REQUIRE(cli("run --config " + kDc + " --horizon 720 --mode hard --budget.per_round 0.2 --output-dir " +
                  dir.string(),
              dir) == 0);
  const Json summary = read_json(dir / "summary.json");
  CHECK(summary["stop_time"].get<int>() < 720);
  const auto rows = read_csv(dir / "trace_selo_1_720.csv");
  CHECK(rows.back()[1] == "stopped");
}

TEST_CASE("invalid configs exit with a machine-readable error") {
  const fs::path dir = scratch("run_invalid");
  CHECK(cli("run --config " + kDc + " --algo nope --output-dir " + dir.string(), dir) == 2);
  const Json err = Json::parse(slurp(dir / "stderr.txt"));
  CHECK(err["error"] == "ConfigInvalid");

  // No point of [0.2, 1]^10 fits a zero budget: the Slater check rejects it.
  CHECK(cli("run --config " + kDc + " --budget.per_round 0 --set.lower 0.2 --output-dir " + dir.string(), dir) == 2);
  CHECK(Json::parse(slurp(dir / "stderr.txt"))["error"] == "ConfigInvalid");

  CHECK(cli("run --config does_not_exist.json", dir) == 2);
  CHECK(cli("frobnicate", dir) == 2);
}

TEST_CASE("sweep cardinality and order independence") {
  const fs::path seq = scratch("sweep_seq");
  const fs::path par = scratch("sweep_par");
  const std::string args = "sweep --config " + kSmoke + " --algos '[\"selo\"]' --output-dir ";
  REQUIRE(cli(args + seq.string() + " --threads 1", seq) == 0);
  REQUIRE(cli(args + par.string() + " --threads 4", par) == 0);

  int traces = 0;
  for (const auto& entry : fs::directory_iterator(seq))
    if (entry.path().filename().string().rfind("trace_", 0) == 0) ++traces;
  CHECK(traces == 4);
  const auto rows = read_csv(seq / "sweep.csv");
  CHECK(rows.size() == 5);
  check_numeric_cells_finite(rows, 5);
  CHECK(slurp(seq / "sweep.csv") == slurp(par / "sweep.csv"));

  const fs::path env_capped = scratch("sweep_env");
  REQUIRE(cli(args + env_capped.string(), env_capped, "OCO_BUDGET_THREADS=1") == 0);
  CHECK(slurp(seq / "sweep.csv") == slurp(env_capped / "sweep.csv"));
}

TEST_CASE("one invalid cell fails alone") {
  const fs::path dir = scratch("sweep_partial");
  Json config = Json::parse(slurp(kSmoke));
  config["algos"] = {"selo"};
  config["output_dir"] = dir.string();
  config["cells"] = Json::array({{{"seed", 2}, {"horizon", 200}, {"overrides", {{"hyper.T0", 500}}}}});
  const fs::path path = dir / "partial.json";
  std::ofstream(path) << config.dump(2);

  CHECK(cli("sweep --config " + path.string(), dir) != 0);
  const auto rows = read_csv(dir / "sweep.csv");
  REQUIRE(rows.size() == 5);
  const int status = column(rows[0], "status");
  const int error = column(rows[0], "error");
  int ok = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r][status] == "ok") {
      ++ok;
      continue;
    }
    CHECK(rows[r][1] == "2");
    CHECK(rows[r][2] == "200");
    CHECK(rows[r][error].find("ConfigInvalid") != std::string::npos);
  }
  CHECK(ok == 3);
  CHECK(slurp(dir / "stderr.txt").find("\"seed\":2") != std::string::npos);
}

TEST_CASE("report contrasts SELO with greedy on a tight budget") {
  const fs::path dir = scratch("report_contrast");
  REQUIRE(cli("sweep --config " + kDc + " --algos '[\"selo\",\"greedy\"]' --horizons '[720]' --seeds '[1,2]' --output-dir " +
                  dir.string(),
              dir) == 0);
  REQUIRE(cli("report " + dir.string(), dir) == 0);
  const auto rows = read_csv(dir / "report.csv");
  REQUIRE(rows.size() == 3);
  const std::vector<std::string> expected_head{"algo",           "T",          "regret_mean",   "regret_se",
                                               "violation_mean", "violation_se", "max_queue_mean", "stop_time_mean",
                                               "regret_slope"};
  CHECK(std::vector<std::string>(rows[0].begin(), rows[0].begin() + 9) == expected_head);
  check_numeric_cells_finite(rows, 1);
  const int violation = column(rows[0], "violation_mean");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const double v = std::stod(rows[r][violation]);
    if (rows[r][0] == "greedy") CHECK(v > 0.0);
    if (rows[r][0] == "selo") CHECK(v == 0.0);
  }
  CHECK(fs::exists(dir / "report.md"));
}

TEST_CASE("single-cell report reproduces the cell") {
  const fs::path dir = scratch("report_single");
  REQUIRE(cli("sweep --config " + kSmoke + " --algos '[\"selo\"]' --horizons '[200]' --seeds '[3]' --output-dir " +
                  dir.string(),
              dir) == 0);
  REQUIRE(cli("report " + dir.string(), dir) == 0);
  CHECK(slurp(dir / "stderr.txt").empty());
  const auto sweep = read_csv(dir / "sweep.csv");
  const auto report = read_csv(dir / "report.csv");
  REQUIRE(report.size() == 2);
  CHECK(report[1][column(report[0], "seeds")] == "1");
  CHECK(report[1][column(report[0], "regret_se")] == "0");
  CHECK(report[1][column(report[0], "regret_slope")].empty());
  CHECK(std::stod(report[1][column(report[0], "regret_mean")]) ==
        doctest::Approx(std::stod(sweep[1][column(sweep[0], "regret_vs_xstar")])).epsilon(1e-9));
  CHECK(std::stod(report[1][column(report[0], "total_loss_mean")]) ==
        std::stod(sweep[1][column(sweep[0], "total_loss")]));
}

TEST_CASE("report on a missing directory fails") {
  const fs::path dir = scratch("report_missing");
  CHECK(cli("report " + (dir / "nothing").string(), dir) != 0);
}

TEST_CASE("offline prints the hindsight solution") {
  const fs::path dir = scratch("offline");
  REQUIRE(cli("offline --config " + kDc + " --horizon 720", dir) == 0);
  const Json out = Json::parse(slurp(dir / "stdout.txt"));
  CHECK(out["x_star"].size() == 10);
  CHECK(out["dual"][0].get<double>() >= 0.0);
  CHECK(out["beta_hat"].get<double>() > 0.0);
}

TEST_CASE("config round trip is idempotent") {
  for (const std::string& path : {kDc, kSmoke}) {
    const ExperimentConfig config = load_config(path);
    const Json once = to_json(config);
    const Json twice = to_json(config_from_json(once));
    CHECK(once == twice);
    CHECK(once.dump() == twice.dump());
  }
  Json bad = to_json(load_config(kSmoke));
  bad["unknown_key"] = 1;
  CHECK_THROWS_AS(config_from_json(bad), ConfigInvalid);
}

TEST_CASE("dotted overrides") {
  Json j = to_json(load_config(kSmoke));
  apply_override(j, "hyper.xi_scale", "0.25");
  apply_override(j, "algo", "greedy");
  apply_override(j, "seeds", "[4,5]");
  const ExperimentConfig c = config_from_json(j);
  CHECK(c.hyper.xi_scale == 0.25);
  CHECK(c.algo == "greedy");
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
}

TEST_CASE("thread cap from the environment") {
  ::setenv("OCO_BUDGET_THREADS", "1", 1);
  CHECK(sweep_threads() == 1);
  ::unsetenv("OCO_BUDGET_THREADS");
  CHECK(sweep_threads() >= 1);
}
