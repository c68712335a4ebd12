#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "selo/baselines.hpp"
#include "selo/controller.hpp"
#include "selo/core.hpp"
#include "selo/environment.hpp"
#include "selo/metrics.hpp"
#include "selo/oracle.hpp"

namespace selo {

using Json = nlohmann::ordered_json;

struct SetConfig {
  std::string kind = "box";  // box | simplex | ball
  double lower = 0.0;        // box bounds, shared by every coordinate
  double upper = 1.0;
  double scale = 1.0;   // simplex
  double radius = 1.0;  // ball

  FeasibleSet build(int dimension) const;
};

struct EnvironmentConfig {
  std::string kind = "datacenter";  // datacenter | synthetic
  DataCenterConfig datacenter = DataCenterConfig::defaults();
  SyntheticConfig synthetic = SyntheticConfig::defaults();

  int dimension() const;
  int resources() const;
};

// One cell-specific patch of dotted overrides, applied before the cell runs.
struct CellOverride {
  std::optional<std::string> algo;
  std::optional<std::uint64_t> seed;
  std::optional<int> horizon;
  Json overrides = Json::object();
};

struct ExperimentConfig {
  std::string algo = "selo";           // selo | safeproj | greedy, used by `run`
  std::vector<std::string> algos;      // sweep; empty means {algo}
  BudgetMode mode = BudgetMode::Soft;
  EnvironmentConfig environment;
  SetConfig set;
  Vector budget_per_round = Vector::Constant(1, 0.75);
  std::vector<int> horizons{720, 1440, 2160};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::optional<int> horizon;          // `run` cell; defaults to horizons[0]
  std::optional<std::uint64_t> seed;   // `run` cell; defaults to seeds[0]
  std::optional<double> beta;          // Slater margin; estimated when absent
  HyperOverrides hyper;
  EstimatorOptions estimator;
  SafeProjConfig safeproj;
  // Exponents p of the safe baseline's explore_rounds = ceil(T^p) sweep.
  // Empty keeps safeproj.explore_rounds.
  std::vector<double> safeproj_explore_grid{1.0 / 3.0, 0.5, 2.0 / 3.0};
  double greedy_step_size = 0.0;
  std::string stop_policy = "zero";    // zero | freeze, decision played after a hard stop
  double eps_tight_cap = 0.5;          // comparator tightening is capped at cap * beta
  std::string output_dir = "out";
  bool emit_decisions = false;
  std::vector<CellOverride> cells;

  /// Structural checks plus the cross-field ones that need an environment:
  /// budget dimension, positive Slater margin, T0 < T for every horizon.
  void validate() const;
  std::vector<std::string> sweep_algos() const;
  FeasibleSet feasible_set() const;
  BudgetSpec budget(int horizon) const;
  // Slater margin used for T0: the configured beta or a sampled estimate.
  double slater_beta() const;
  HyperParams hyperparams(int horizon) const;
};

Json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const Json& json);
ExperimentConfig load_config(const std::string& path);

/// Sets json[a][b][c] = value for the dotted key "a.b.c". The value is parsed
/// as JSON when possible and kept as a string otherwise.
void apply_override(Json& json, const std::string& dotted_key, const std::string& value);
void apply_override(Json& json, const std::string& dotted_key, const Json& value);
inline void apply_override(Json& json, const std::string& dotted_key, const char* value) {
  apply_override(json, dotted_key, std::string(value));
}

/// Independent RNG seeds for the environment and the algorithm of one cell.
std::uint64_t environment_seed(std::uint64_t seed);
std::uint64_t algorithm_seed(std::uint64_t seed);

std::unique_ptr<Environment> realize_environment(const ExperimentConfig& config, std::uint64_t seed, int horizon);

/// Algorithm labels. "safeproj@p" runs the safe baseline with
/// explore_rounds = ceil(T^p).
std::unique_ptr<Policy> make_policy(const ExperimentConfig& config, const std::string& algo, int horizon);

struct OracleResult {
  OfflineSolution solution;
  double beta_hat = 0.0;
};

/// x* of the realized hindsight problem at tightening 0. Throws MissingOracle.
OracleResult solve_hindsight(const ExperimentConfig& config, const Environment& env, double tightening = 0.0);

struct CellResult {
  ExperimentTrace trace;
  SummaryStats summary;
  double eps_tight_raw = 0.0;  // 2 (xi + 2 alpha |x*|_{Sigma^-1}) after exploration
  int solver_failures = 0;
};

/// Plays one (algo, seed, horizon) cell end to end. `xstar` may carry a
/// precomputed hindsight solution for this seed and horizon.
CellResult run_cell(const ExperimentConfig& config, const std::string& algo, std::uint64_t seed, int horizon,
                    const OracleResult* xstar = nullptr);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

void write_trace_csv(const std::string& path, const ExperimentTrace& trace, bool emit_decisions);
Json summary_to_json(const CellResult& cell);

struct SweepCell {
  std::string algo;
  std::uint64_t seed = 0;
  int horizon = 0;
  bool ok = false;
  std::string error;
  SummaryStats summary;
};

struct SweepOutcome {
  std::vector<SweepCell> cells;  // sorted by (algo, seed, horizon)
  int failures() const;
};

/// Runs every cell on a pool of at most `threads` workers (0 = automatic,
/// capped by OCO_BUDGET_THREADS) and writes traces plus sweep.csv and the
/// resolved config.json into `output_dir`.
SweepOutcome run_sweep(const ExperimentConfig& config, int threads = 0);

/// Worker count: hardware concurrency, capped by OCO_BUDGET_THREADS when set.
int sweep_threads();

struct ReportRow {
  std::string algo;
  int horizon = 0;
  int seeds = 0;
  double regret_mean = 0.0;
  double regret_se = 0.0;
  double violation_mean = 0.0;
  double violation_se = 0.0;
  double violation_of_mean = 0.0;
  double max_queue_mean = 0.0;
  double stop_time_mean = 0.0;
  std::optional<double> regret_slope;
  double total_loss_mean = 0.0;
};

struct Report {
  std::vector<ReportRow> rows;
  std::vector<std::string> missing_oracles;
};

/// Aggregates a sweep directory; regret is recomputed against x* solved once
/// per (seed, horizon). Writes report.csv and report.md next to sweep.csv.
Report build_report(const std::string& sweep_dir);

}  // namespace selo
