// selo: run, sweep, report and offline subcommands over JSON experiment configs.
//
// Any `--key value` (or `--key=value`) not listed below is a dotted override of
// the config, e.g. `--hyper.xi_scale 0.2 --algo greedy --mode hard`. Dashes in
// keys become underscores, and a bare `--flag` sets it to true.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "selo/experiment.hpp"

namespace {

using selo::Json;

int fail(const std::string& code, const std::string& message) {
  std::cerr << Json{{"error", code}, {"message", message}}.dump() << "\n";
  return code == "ConfigInvalid" || code == "usage" ? 2 : 1;
}

Json load_raw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw selo::ConfigInvalid("cannot open config file " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw selo::ConfigInvalid(path + ": " + e.what());
  }
}

// Applies the leftover `--key value` tokens as dotted overrides.
void apply_extras(Json& json, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string token = extras[i];
    if (token.rfind("--", 0) != 0 || token.size() == 2) {
      throw selo::ConfigInvalid("unexpected argument '" + token + "'");
    }
    token = token.substr(2);
    std::string value;
    if (const auto eq = token.find('='); eq != std::string::npos) {
      value = token.substr(eq + 1);
      token = token.substr(0, eq);
    } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
      value = extras[++i];
    } else {
      value = "true";
    }
    for (char& c : token) {
      if (c == '-') c = '_';
    }
    selo::apply_override(json, token, value);
  }
}

selo::ExperimentConfig resolve(const std::string& path, const std::vector<std::string>& extras) {
  Json json = load_raw(path);
  apply_extras(json, extras);
  selo::ExperimentConfig config = selo::config_from_json(json);
  config.validate();
  return config;
}

int cmd_run(const std::string& path, const std::vector<std::string>& extras) {
  const selo::ExperimentConfig config = resolve(path, extras);
  const int horizon = config.horizon.value_or(config.horizons.front());
  const std::uint64_t seed = config.seed.value_or(config.seeds.front());
  const selo::CellResult cell = selo::run_cell(config, config.algo, seed, horizon);

  namespace fs = std::filesystem;
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  const fs::path trace_path =
      dir / ("trace_" + config.algo + "_" + std::to_string(seed) + "_" + std::to_string(horizon) + ".csv");
  selo::write_trace_csv(trace_path.string(), cell.trace, config.emit_decisions);
  const Json summary = selo::summary_to_json(cell);
  std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_sweep(const std::string& path, const std::vector<std::string>& extras, int threads) {
  const selo::ExperimentConfig config = resolve(path, extras);
  const selo::SweepOutcome outcome = selo::run_sweep(config, threads);
  for (const auto& cell : outcome.cells) {
    if (!cell.ok) {
      std::cerr << Json{{"error", "CellFailed"},
                        {"algo", cell.algo},
                        {"seed", cell.seed},
                        {"horizon", cell.horizon},
                        {"message", cell.error}}
                       .dump()
                << "\n";
    }
  }
  std::cout << "sweep: " << outcome.cells.size() - outcome.failures() << " of " << outcome.cells.size()
            << " cells succeeded; results in " << config.output_dir << "/sweep.csv\n";
  return outcome.failures() == 0 ? 0 : 1;
}

int cmd_report(const std::string& dir) {
  const selo::Report report = selo::build_report(dir);
  for (const auto& missing : report.missing_oracles) {
    std::cerr << Json{{"error", "MissingOracle"}, {"message", missing}}.dump() << "\n";
  }
  std::cout << "report: " << report.rows.size() << " rows written to " << dir << "/report.csv\n";
  return report.missing_oracles.empty() ? 0 : 1;
}

int cmd_offline(const std::string& path, const std::vector<std::string>& extras) {
  const selo::ExperimentConfig config = resolve(path, extras);
  const int horizon = config.horizon.value_or(config.horizons.front());
  const std::uint64_t seed = config.seed.value_or(config.seeds.front());
  const auto env = selo::realize_environment(config, seed, horizon);
  const selo::OracleResult result = selo::solve_hindsight(config, *env, 0.0);
  const auto& sol = result.solution;
  Json out;
  out["seed"] = seed;
  out["horizon"] = horizon;
  out["x_star"] = std::vector<double>(sol.x.data(), sol.x.data() + sol.x.size());
  out["dual"] = std::vector<double>(sol.dual.data(), sol.dual.data() + sol.dual.size());
  out["objective"] = sol.objective;
  out["beta_hat"] = result.beta_hat;
  out["stationarity"] = sol.stationarity;
  out["infeasibility"] = sol.infeasibility;
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe online convex optimization under unknown linear budgets"};
  app.require_subcommand(1);

  std::string config_path;
  std::string sweep_dir;
  int threads = 0;

  auto* run = app.add_subcommand("run", "Play one (algo, seed, horizon) cell");
  run->add_option("--config", config_path, "JSON experiment config")->required();
  run->allow_extras();

  auto* sweep = app.add_subcommand("sweep", "Play every algo x seed x horizon cell");
  sweep->add_option("--config", config_path, "JSON experiment config")->required();
  sweep->add_option("--threads", threads, "Worker count (0 = automatic)");
  sweep->allow_extras();

  auto* report = app.add_subcommand("report", "Aggregate a sweep directory");
  report->add_option("dir", sweep_dir, "Sweep output directory")->required();

  auto* offline = app.add_subcommand("offline", "Solve the hindsight problem for one seed and horizon");
  offline->add_option("--config", config_path, "JSON experiment config")->required();
  offline->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what());
  }

  try {
    if (run->parsed()) return cmd_run(config_path, run->remaining());
    if (sweep->parsed()) return cmd_sweep(config_path, sweep->remaining(), threads);
    if (report->parsed()) return cmd_report(sweep_dir);
    return cmd_offline(config_path, offline->remaining());
  } catch (const selo::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail("error", e.what());
  }
}
