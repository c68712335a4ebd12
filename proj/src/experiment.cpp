#include "selo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace selo {

namespace {

namespace fs = std::filesystem;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json matrix_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

Vector json_vector(const Json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigInvalid(key + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigInvalid(key + ": expected an array of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Matrix json_matrix(const Json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw ConfigInvalid(key + ": expected a nonempty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = json_vector(j[r], key);
    if (static_cast<std::size_t>(row.size()) != cols) throw ConfigInvalid(key + ": ragged rows");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return;
  try {
    out = j[key].get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid(where + "." + key + ": " + e.what());
  }
}

template <class T>
void read_optional(const Json& j, const char* key, std::optional<T>& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (j[key].is_null()) {
    out.reset();
    return;
  }
  T value{};
  read(j, key, value, where);
  out = value;
}

template <class T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

const Json& object_at(const Json& j, const char* key, const std::string& where) {
  static const Json empty = Json::object();
  if (!j.contains(key) || j[key].is_null()) return empty;
  if (!j[key].is_object()) throw ConfigInvalid(where + "." + key + ": expected an object");
  return j[key];
}

Json datacenter_json(const DataCenterConfig& c) {
  Json j;
  j["regions"] = c.regions;
  j["base_capacity"] = vector_json(c.base_capacity);
  j["service_mean"] = c.service_mean;
  j["service_std"] = c.service_std;
  j["service_min"] = c.service_min;
  j["service_max"] = c.service_max;
  j["traffic_profile"] = matrix_json(c.traffic_profile);
  j["traffic_noise_std"] = c.traffic_noise_std;
  j["price_profile"] = matrix_json(c.price_profile);
  j["price_noise_std"] = c.price_noise_std;
  j["price_trace_path"] = optional_json(c.price_trace_path);
  j["domain_floor"] = c.domain_floor;
  j["decision_floor"] = c.decision_floor;
  return j;
}

DataCenterConfig datacenter_from_json(const Json& j) {
  const std::string where = "environment.datacenter";
  int regions = 10;
  read(j, "regions", regions, where);
  if (regions < 1) throw ConfigInvalid(where + ".regions must be positive");
  DataCenterConfig c = DataCenterConfig::defaults(regions);
  if (j.contains("base_capacity")) c.base_capacity = json_vector(j["base_capacity"], where + ".base_capacity");
  read(j, "service_mean", c.service_mean, where);
  read(j, "service_std", c.service_std, where);
  read(j, "service_min", c.service_min, where);
  read(j, "service_max", c.service_max, where);
  if (j.contains("traffic_profile") && !j["traffic_profile"].is_null()) {
    c.traffic_profile = json_matrix(j["traffic_profile"], where + ".traffic_profile");
  }
  read(j, "traffic_noise_std", c.traffic_noise_std, where);
  if (j.contains("price_profile") && !j["price_profile"].is_null()) {
    c.price_profile = json_matrix(j["price_profile"], where + ".price_profile");
  }
  read(j, "price_noise_std", c.price_noise_std, where);
  read_optional(j, "price_trace_path", c.price_trace_path, where);
  read(j, "domain_floor", c.domain_floor, where);
  read(j, "decision_floor", c.decision_floor, where);
  return c;
}

Json synthetic_json(const SyntheticConfig& c) {
  Json j;
  j["dimension"] = c.dimension;
  j["resources"] = c.resources;
  j["target"] = vector_json(c.target);
  j["target_noise_std"] = c.target_noise_std;
  j["consumption"] = matrix_json(c.consumption);
  j["consumption_noise_std"] = c.consumption_noise_std;
  return j;
}

SyntheticConfig synthetic_from_json(const Json& j) {
  const std::string where = "environment.synthetic";
  int d = 2, m = 1;
  read(j, "dimension", d, where);
  read(j, "resources", m, where);
  if (d < 1 || m < 1) throw ConfigInvalid(where + ": dimension and resources must be positive");
  SyntheticConfig c = SyntheticConfig::defaults(d, m);
  if (j.contains("target")) c.target = json_vector(j["target"], where + ".target");
  read(j, "target_noise_std", c.target_noise_std, where);
  if (j.contains("consumption")) c.consumption = json_matrix(j["consumption"], where + ".consumption");
  read(j, "consumption_noise_std", c.consumption_noise_std, where);
  return c;
}

bool is_known_algo(const std::string& algo) {
  if (algo == "selo" || algo == "safeproj" || algo == "greedy") return true;
  if (algo.rfind("safeproj@", 0) != 0) return false;
  const std::string tail = algo.substr(9);
  double p = 0.0;
  const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), p);
  return ec == std::errc() && ptr == tail.data() + tail.size() && p > 0.0 && p < 1.0;
}

std::string grid_label(double exponent) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "safeproj@%.2f", exponent);
  return buf;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << text;
}

std::string cell_key(const std::string& algo, std::uint64_t seed, int horizon) {
  return algo + "_" + std::to_string(seed) + "_" + std::to_string(horizon);
}

// Gram matrix lambda I + sum x x^T over the exploration rounds of a trace.
Matrix exploration_gram(const ExperimentTrace& trace, double regularizer) {
  const Eigen::Index d = trace.rounds.empty() ? 0 : trace.rounds.front().x.size();
  Matrix gram = regularizer * Matrix::Identity(d, d);
  for (const auto& r : trace.rounds) {
    if (r.phase != Phase::Explore) break;
    gram.noalias() += r.x * r.x.transpose();
  }
  return gram;
}

}  // namespace

// ---------------------------------------------------------------------------

FeasibleSet SetConfig::build(int dimension) const {
  if (kind == "box") {
    if (!(lower < upper)) throw ConfigInvalid("set: box needs lower < upper");
    return FeasibleSet::box(Vector::Constant(dimension, lower), Vector::Constant(dimension, upper));
  }
  if (kind == "simplex") {
    if (!(scale > 0.0)) throw ConfigInvalid("set: simplex scale must be positive");
    return FeasibleSet::simplex(dimension, scale);
  }
  if (kind == "ball") {
    if (!(radius > 0.0)) throw ConfigInvalid("set: ball radius must be positive");
    return FeasibleSet::nonnegative_ball(dimension, radius);
  }
  throw ConfigInvalid("set.kind must be box, simplex or ball, got '" + kind + "'");
}

int EnvironmentConfig::dimension() const {
  return kind == "synthetic" ? synthetic.dimension : datacenter.regions;
}

int EnvironmentConfig::resources() const { return kind == "synthetic" ? synthetic.resources : 1; }

std::vector<std::string> ExperimentConfig::sweep_algos() const {
  std::vector<std::string> base = algos.empty() ? std::vector<std::string>{algo} : algos;
  std::vector<std::string> out;
  for (const auto& a : base) {
    if (a == "safeproj" && !safeproj_explore_grid.empty()) {
      for (double p : safeproj_explore_grid) out.push_back(grid_label(p));
    } else {
      out.push_back(a);
    }
  }
  return out;
}

FeasibleSet ExperimentConfig::feasible_set() const { return set.build(environment.dimension()); }

BudgetSpec ExperimentConfig::budget(int T) const {
  try {
    return BudgetSpec::from_per_round(budget_per_round, T, mode);
  } catch (const ContractViolation& e) {
    throw ConfigInvalid(std::string("budget: ") + e.what());
  }
}

double ExperimentConfig::slater_beta() const {
  if (beta) return *beta;
  const int longest = *std::max_element(horizons.begin(), horizons.end());
  Matrix mean;
  if (environment.kind == "synthetic") {
    mean = environment.synthetic.consumption;
  } else {
    mean = DataCenterEnv(environment.datacenter).mean_consumption(std::max(longest, horizon.value_or(0)));
  }
  Rng rng(0x51a7e5);
  return slater_margin(mean, budget_per_round, feasible_set(), 512, rng);
}

HyperParams ExperimentConfig::hyperparams(int T) const {
  try {
    return default_hyperparams(T, std::min(slater_beta(), 1.0), hyper);
  } catch (const ContractViolation& e) {
    throw ConfigInvalid(std::string("hyper: ") + e.what());
  }
}

void ExperimentConfig::validate() const {
  for (const auto& a : algos.empty() ? std::vector<std::string>{algo} : algos) {
    if (!is_known_algo(a)) throw ConfigInvalid("unknown algo '" + a + "' (expected selo, safeproj or greedy)");
  }
  if (!is_known_algo(algo)) throw ConfigInvalid("unknown algo '" + algo + "'");
  if (environment.kind == "datacenter") {
    environment.datacenter.validate();
  } else if (environment.kind == "synthetic") {
    environment.synthetic.validate();
  } else {
    throw ConfigInvalid("environment.kind must be datacenter or synthetic, got '" + environment.kind + "'");
  }
  (void)feasible_set();
  if (budget_per_round.size() != environment.resources()) {
    throw ConfigInvalid("budget.per_round has " + std::to_string(budget_per_round.size()) +
                        " entries but the environment has " + std::to_string(environment.resources()) + " resources");
  }
  if (horizons.empty()) throw ConfigInvalid("horizons must not be empty");
  if (seeds.empty()) throw ConfigInvalid("seeds must not be empty");
  if (stop_policy != "zero" && stop_policy != "freeze") throw ConfigInvalid("stop_policy must be zero or freeze");
  if (!(eps_tight_cap > 0.0 && eps_tight_cap <= 1.0)) throw ConfigInvalid("eps_tight_cap must lie in (0, 1]");
  for (double p : safeproj_explore_grid) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigInvalid("safeproj.explore_grid exponents must lie in (0, 1)");
  }
  if (beta && !(*beta > 0.0)) throw ConfigInvalid("beta must be positive");

  const double margin = slater_beta();
  if (!(margin > 0.0)) {
    throw ConfigInvalid("no strictly feasible point found (Slater margin estimate " + format_double(margin) + ")");
  }
  std::vector<int> all = horizons;
  if (horizon) all.push_back(*horizon);
  for (int T : all) {
    (void)budget(T);
    const HyperParams p = hyperparams(T);
    if (p.T0 >= T) {
      throw ConfigInvalid("exploration length T0 = " + std::to_string(p.T0) + " must be below the horizon " +
                          std::to_string(T));
    }
  }
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["algo"] = c.algo;
  j["algos"] = c.algos;
  j["mode"] = to_string(c.mode);
  j["environment"] = {{"kind", c.environment.kind},
                      {"datacenter", datacenter_json(c.environment.datacenter)},
                      {"synthetic", synthetic_json(c.environment.synthetic)}};
  j["set"] = {{"kind", c.set.kind},
              {"lower", c.set.lower},
              {"upper", c.set.upper},
              {"scale", c.set.scale},
              {"radius", c.set.radius}};
  j["budget"] = {{"per_round", vector_json(c.budget_per_round)}};
  j["horizons"] = c.horizons;
  j["seeds"] = c.seeds;
  j["horizon"] = optional_json(c.horizon);
  j["seed"] = optional_json(c.seed);
  j["beta"] = optional_json(c.beta);
  j["hyper"] = {{"V", optional_json(c.hyper.V)},
                {"eta", optional_json(c.hyper.eta)},
                {"xi", optional_json(c.hyper.xi)},
                {"T0", optional_json(c.hyper.T0)},
                {"V_scale", c.hyper.V_scale},
                {"eta_scale", c.hyper.eta_scale},
                {"xi_scale", c.hyper.xi_scale},
                {"T0_scale", c.hyper.T0_scale},
                {"alpha_scale", c.hyper.alpha_scale}};
  j["estimator"] = {{"regularizer", c.estimator.regularizer},
                    {"delta_exponent", c.estimator.delta_exponent},
                    {"smoothing_eps", c.estimator.smoothing_eps},
                    {"solver_tol", c.estimator.solver_tol},
                    {"solver_max_iterations", c.estimator.solver_max_iterations}};
  j["safeproj"] = {{"explore_rounds", c.safeproj.explore_rounds},
                   {"step_size", c.safeproj.step_size},
                   {"penalty_growth", c.safeproj.penalty_growth},
                   {"feas_tol", c.safeproj.feas_tol},
                   {"explore_grid", c.safeproj_explore_grid}};
  j["greedy"] = {{"step_size", c.greedy_step_size}};
  j["stop_policy"] = c.stop_policy;
  j["eps_tight_cap"] = c.eps_tight_cap;
  j["output_dir"] = c.output_dir;
  j["emit_decisions"] = c.emit_decisions;
  Json cells = Json::array();
  for (const auto& cell : c.cells) {
    cells.push_back({{"algo", optional_json(cell.algo)},
                     {"seed", optional_json(cell.seed)},
                     {"horizon", optional_json(cell.horizon)},
                     {"overrides", cell.overrides}});
  }
  j["cells"] = cells;
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigInvalid("config: top level must be an object");
  static const std::set<std::string> known{"algo",   "algos",     "mode",   "environment", "set",
                                           "budget", "horizons",  "seeds",  "horizon",     "seed",
                                           "beta",   "hyper",     "estimator", "safeproj", "greedy",
                                           "stop_policy", "eps_tight_cap", "output_dir", "emit_decisions", "cells"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigInvalid("config: unknown key '" + key + "'");
  }
  ExperimentConfig c;
  read(j, "algo", c.algo, "config");
  read(j, "algos", c.algos, "config");
  if (j.contains("mode")) {
    try {
      c.mode = budget_mode_from_string(j["mode"].get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigInvalid(std::string("mode: ") + e.what());
    }
  }

  const Json& env = object_at(j, "environment", "config");
  read(env, "kind", c.environment.kind, "environment");
  c.environment.datacenter = datacenter_from_json(object_at(env, "datacenter", "environment"));
  c.environment.synthetic = synthetic_from_json(object_at(env, "synthetic", "environment"));

  const Json& set = object_at(j, "set", "config");
  read(set, "kind", c.set.kind, "set");
  read(set, "lower", c.set.lower, "set");
  read(set, "upper", c.set.upper, "set");
  read(set, "scale", c.set.scale, "set");
  read(set, "radius", c.set.radius, "set");

  const Json& budget = object_at(j, "budget", "config");
  if (budget.contains("per_round")) {
    const Json& b = budget["per_round"];
    c.budget_per_round = b.is_number() ? Vector::Constant(c.environment.resources(), b.get<double>())
                                       : json_vector(b, "budget.per_round");
  } else {
    c.budget_per_round = Vector::Constant(c.environment.resources(), 0.75);
  }

  read(j, "horizons", c.horizons, "config");
  read(j, "seeds", c.seeds, "config");
  read_optional(j, "horizon", c.horizon, "config");
  read_optional(j, "seed", c.seed, "config");
  read_optional(j, "beta", c.beta, "config");

  const Json& hyper = object_at(j, "hyper", "config");
  read_optional(hyper, "V", c.hyper.V, "hyper");
  read_optional(hyper, "eta", c.hyper.eta, "hyper");
  read_optional(hyper, "xi", c.hyper.xi, "hyper");
  read_optional(hyper, "T0", c.hyper.T0, "hyper");
  read(hyper, "V_scale", c.hyper.V_scale, "hyper");
  read(hyper, "eta_scale", c.hyper.eta_scale, "hyper");
  read(hyper, "xi_scale", c.hyper.xi_scale, "hyper");
  read(hyper, "T0_scale", c.hyper.T0_scale, "hyper");
  read(hyper, "alpha_scale", c.hyper.alpha_scale, "hyper");

  const Json& est = object_at(j, "estimator", "config");
  read(est, "regularizer", c.estimator.regularizer, "estimator");
  read(est, "delta_exponent", c.estimator.delta_exponent, "estimator");
  read(est, "smoothing_eps", c.estimator.smoothing_eps, "estimator");
  read(est, "solver_tol", c.estimator.solver_tol, "estimator");
  read(est, "solver_max_iterations", c.estimator.solver_max_iterations, "estimator");

  const Json& sp = object_at(j, "safeproj", "config");
  read(sp, "explore_rounds", c.safeproj.explore_rounds, "safeproj");
  read(sp, "step_size", c.safeproj.step_size, "safeproj");
  read(sp, "penalty_growth", c.safeproj.penalty_growth, "safeproj");
  read(sp, "feas_tol", c.safeproj.feas_tol, "safeproj");
  read(sp, "explore_grid", c.safeproj_explore_grid, "safeproj");

  read(object_at(j, "greedy", "config"), "step_size", c.greedy_step_size, "greedy");
  read(j, "stop_policy", c.stop_policy, "config");
  read(j, "eps_tight_cap", c.eps_tight_cap, "config");
  read(j, "output_dir", c.output_dir, "config");
  read(j, "emit_decisions", c.emit_decisions, "config");

  if (j.contains("cells") && !j["cells"].is_null()) {
    if (!j["cells"].is_array()) throw ConfigInvalid("cells: expected an array");
    for (const auto& entry : j["cells"]) {
      if (!entry.is_object()) throw ConfigInvalid("cells: entries must be objects");
      CellOverride cell;
      read_optional(entry, "algo", cell.algo, "cells");
      read_optional(entry, "seed", cell.seed, "cells");
      read_optional(entry, "horizon", cell.horizon, "cells");
      cell.overrides = object_at(entry, "overrides", "cells");
      c.cells.push_back(std::move(cell));
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigInvalid(path + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_override(Json& json, const std::string& dotted_key, const Json& value) {
  if (dotted_key.empty()) throw ConfigInvalid("override: empty key");
  Json* node = &json;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigInvalid("override: malformed key '" + dotted_key + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigInvalid("override: '" + dotted_key + "' descends into a non-object");
      *node = Json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

void apply_override(Json& json, const std::string& dotted_key, const std::string& value) {
  Json parsed = Json::parse(value, nullptr, false);
  apply_override(json, dotted_key, parsed.is_discarded() ? Json(value) : parsed);
}

std::uint64_t environment_seed(std::uint64_t seed) { return splitmix64(seed * 2 + 1); }
std::uint64_t algorithm_seed(std::uint64_t seed) { return splitmix64(seed * 2 + 2); }

std::unique_ptr<Environment> realize_environment(const ExperimentConfig& config, std::uint64_t seed, int horizon) {
  if (config.environment.kind == "synthetic") {
    return std::make_unique<SyntheticRealization>(config.environment.synthetic, horizon, environment_seed(seed));
  }
  DataCenterEnv env(config.environment.datacenter);
  return std::make_unique<DataCenterRealization>(env.realize(horizon, environment_seed(seed)));
}

std::unique_ptr<Policy> make_policy(const ExperimentConfig& config, const std::string& algo, int horizon) {
  if (!is_known_algo(algo)) throw ConfigInvalid("unknown algo '" + algo + "'");
  const FeasibleSet set = config.feasible_set();
  const BudgetSpec budget = config.budget(horizon);
  if (algo == "selo") {
    return std::make_unique<SeloController>(set, config.hyperparams(horizon), budget, config.estimator);
  }
  if (algo == "greedy") return std::make_unique<GreedyOgdPolicy>(set, budget, config.greedy_step_size);
  SafeProjConfig sp = config.safeproj;
  if (algo != "safeproj") {
    const double p = std::stod(algo.substr(9));
    sp.explore_rounds = static_cast<int>(std::ceil(std::pow(static_cast<double>(horizon), p)));
  }
  if (sp.explore_rounds >= horizon) throw ConfigInvalid("safeproj.explore_rounds must be below the horizon");
  return std::make_unique<SafeProjectionPolicy>(set, budget, sp, config.hyper.alpha_scale,
                                                config.estimator.regularizer, config.estimator.delta_exponent);
}

OracleResult solve_hindsight(const ExperimentConfig& config, const Environment& env, double tightening) {
  OfflineProblem problem{realized_total_loss(env), env.mean_consumption(), config.budget_per_round,
                         config.feasible_set(), tightening};
  OracleResult out;
  Rng rng(0x0ac1e);
  out.beta_hat = slater_margin(problem.A, problem.b, problem.set, 512, rng);
  try {
    out.solution = solve_offline(problem, 1e-7);
  } catch (const Error& e) {
    throw MissingOracle("offline solve failed (tightening " + format_double(tightening) + "): " + e.what());
  }
  return out;
}

CellResult run_cell(const ExperimentConfig& config, const std::string& algo, std::uint64_t seed, int horizon,
                    const OracleResult* xstar) {
  const std::unique_ptr<Environment> env = realize_environment(config, seed, horizon);
  const std::unique_ptr<Policy> policy = make_policy(config, algo, horizon);
  const BudgetSpec budget = config.budget(horizon);
  const int d = env->dimension();
  const int m = env->resources();

  CellResult cell;
  ExperimentTrace& trace = cell.trace;
  trace.algo = algo;
  trace.seed = seed;
  trace.horizon = horizon;
  trace.mode = config.mode;
  trace.stop_time = horizon;
  trace.params = config.hyperparams(horizon);
  trace.rounds.reserve(static_cast<std::size_t>(horizon));

  Rng rng(algorithm_seed(seed));
  Vector queue = Vector::Zero(m);
  DecisionVector last_x = Vector::Zero(d);
  bool stopped = false;
  for (int t = 1; t <= horizon; ++t) {
    TraceRecord rec;
    rec.t = t;
    if (stopped) {
      // The interaction is over: nothing is consumed, and the declared stop
      // decision is charged its loss.
      rec.phase = Phase::Stopped;
      rec.x = config.stop_policy == "freeze" ? last_x : Vector::Zero(d);
      const LossFeedback f = env->loss(t, rec.x);
      rec.loss = f.value;
      rec.gradient = f.gradient;
      rec.consumption = Vector::Zero(m);
      rec.queue = queue;
      rec.queue_next = queue;
      rec.gap = Vector::Zero(m);
    } else {
      rec.x = policy->decide(rng);
      const LossFeedback f = env->loss(t, rec.x);
      rec.consumption = env->observe_consumption(t, rec.x);
      const RoundReport report = policy->observe(rec.x, f, rec.consumption);
      rec.phase = report.phase;
      rec.loss = f.value;
      rec.gradient = f.gradient;
      rec.queue = report.queue_before;
      rec.queue_next = report.queue_after;
      rec.gap = report.gap;
      queue = report.queue_after;
      last_x = rec.x;
      if (policy->stopped()) {
        stopped = true;
        trace.stop_time = t;
      }
    }
    trace.rounds.push_back(std::move(rec));
  }

  SummaryStats& s = cell.summary;
  s.total_loss = trace.total_loss();
  s.total_consumption = trace.total_consumption();
  s.violation = config.mode == BudgetMode::Soft ? violation(trace, budget) : Vector::Zero(m);
  s.max_queue_norm = max_queue_norm(trace);
  s.stop_time = trace.stop_time;

  OracleResult own;
  if (xstar == nullptr) {
    own = solve_hindsight(config, *env, 0.0);
    xstar = &own;
  }
  s.regret_vs_xstar = s.total_loss - xstar->solution.objective;
  s.regret_vs_eps_tight = s.regret_vs_xstar;

  if (const auto* selo = dynamic_cast<const SeloController*>(policy.get())) {
    cell.solver_failures = selo->solver_failures();
    const Matrix gram_inv = exploration_gram(trace, config.estimator.regularizer).inverse();
    const Vector& x = xstar->solution.x;
    cell.eps_tight_raw = 2.0 * (trace.params.xi + 2.0 * selo->alpha() * std::sqrt(x.dot(gram_inv * x)));
    s.tightening = std::min(cell.eps_tight_raw, config.eps_tight_cap * xstar->beta_hat);
    const OracleResult tight = solve_hindsight(config, *env, s.tightening);
    s.regret_vs_eps_tight = s.total_loss - tight.solution.objective;
    const DriftDiagnostic drift = drift_diagnostic(trace, tight.solution.x, comparator_losses(*env, tight.solution.x),
                                                   env->mean_consumption(), budget.per_round);
    s.drift_diagnostic_mean = drift.mean;
    s.drift_diagnostic_se = drift.standard_error;
  }
  return cell;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

void write_trace_csv(const std::string& path, const ExperimentTrace& trace, bool emit_decisions) {
  const int m = trace.resources();
  const int d = trace.rounds.empty() ? 0 : static_cast<int>(trace.rounds.front().x.size());
  std::string out = "t,phase,loss";
  for (const char* prefix : {"cost_", "Q_", "ghat_"}) {
    for (int i = 1; i <= m; ++i) out += "," + std::string(prefix) + std::to_string(i);
  }
  if (emit_decisions) {
    for (int i = 1; i <= d; ++i) out += ",x_" + std::to_string(i);
  }
  out += "\r\n";
  for (const auto& r : trace.rounds) {
    out += std::to_string(r.t) + "," + to_string(r.phase) + "," + format_double(r.loss);
    for (const Vector* v : {&r.consumption, &r.queue, &r.gap}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) out += "," + format_double((*v)(i));
    }
    if (emit_decisions) {
      for (Eigen::Index i = 0; i < r.x.size(); ++i) out += "," + format_double(r.x(i));
    }
    out += "\r\n";
  }
  write_text(path, out);
}

Json summary_to_json(const CellResult& cell) {
  const SummaryStats& s = cell.summary;
  const ExperimentTrace& t = cell.trace;
  Json j;
  j["schema_version"] = SummaryStats::kSchemaVersion;
  j["algo"] = t.algo;
  j["seed"] = t.seed;
  j["horizon"] = t.horizon;
  j["mode"] = to_string(t.mode);
  j["total_loss"] = s.total_loss;
  j["regret_vs_xstar"] = s.regret_vs_xstar;
  j["regret_vs_eps_tight"] = s.regret_vs_eps_tight;
  j["total_consumption"] = vector_json(s.total_consumption);
  j["violation"] = vector_json(s.violation);
  j["max_queue_norm"] = s.max_queue_norm;
  j["stop_time"] = s.stop_time;
  j["drift_diagnostic_mean"] = s.drift_diagnostic_mean;
  j["drift_diagnostic_se"] = s.drift_diagnostic_se;
  j["tightening"] = s.tightening;
  j["tightening_uncapped"] = cell.eps_tight_raw;
  j["solver_failures"] = cell.solver_failures;
  j["params"] = {{"V", t.params.V},
                 {"eta", t.params.eta},
                 {"xi", t.params.xi},
                 {"alpha_scale", t.params.alpha_scale},
                 {"T0", t.params.T0}};
  return j;
}

// ---------------------------------------------------------------------------

int SweepOutcome::failures() const {
  return static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const SweepCell& c) { return !c.ok; }));
}

int sweep_threads() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* cap = std::getenv("OCO_BUDGET_THREADS")) {
    const int limit = std::atoi(cap);
    if (limit >= 1) n = std::min(n, limit);
  }
  return n;
}

SweepOutcome run_sweep(const ExperimentConfig& config, int threads) {
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  write_text(dir / "config.json", to_json(config).dump(2) + "\n");

  struct Job {
    SweepCell cell;
    std::optional<ExperimentConfig> patched;
    std::string patch_error;
  };
  std::vector<Job> jobs;
  for (const auto& algo : config.sweep_algos()) {
    for (std::uint64_t seed : config.seeds) {
      for (int T : config.horizons) {
        Job job;
        job.cell.algo = algo;
        job.cell.seed = seed;
        job.cell.horizon = T;
        for (const auto& o : config.cells) {
          if ((o.algo && *o.algo != algo) || (o.seed && *o.seed != seed) || (o.horizon && *o.horizon != T)) continue;
          try {
            Json j = job.patched ? to_json(*job.patched) : to_json(config);
            for (const auto& [key, value] : o.overrides.items()) apply_override(j, key, value);
            job.patched = config_from_json(j);
          } catch (const std::exception& e) {
            job.patch_error = e.what();
          }
        }
        jobs.push_back(std::move(job));
      }
    }
  }

  // x* is shared by every algorithm on the same (seed, horizon).
  struct OracleSlot {
    std::once_flag once;
    std::optional<OracleResult> value;
    std::string error;
  };
  std::map<std::pair<std::uint64_t, int>, OracleSlot> oracles;
  for (std::uint64_t seed : config.seeds) {
    for (int T : config.horizons) oracles[{seed, T}];
  }

  auto run_job = [&](Job& job) {
    SweepCell& cell = job.cell;
    try {
      if (!job.patch_error.empty()) throw ConfigInvalid(job.patch_error);
      const ExperimentConfig& cfg = job.patched ? *job.patched : config;
      cfg.validate();
      const OracleResult* xstar = nullptr;
      if (!job.patched) {
        OracleSlot& slot = oracles.at({cell.seed, cell.horizon});
        std::call_once(slot.once, [&] {
          try {
            const auto env = realize_environment(config, cell.seed, cell.horizon);
            slot.value = solve_hindsight(config, *env, 0.0);
          } catch (const std::exception& e) {
            slot.error = e.what();
          }
        });
        if (!slot.value) throw MissingOracle(slot.error);
        xstar = &*slot.value;
      }
      const CellResult result = run_cell(cfg, cell.algo, cell.seed, cell.horizon, xstar);
      write_trace_csv((dir / ("trace_" + cell_key(cell.algo, cell.seed, cell.horizon) + ".csv")).string(),
                      result.trace, cfg.emit_decisions);
      cell.summary = result.summary;
      cell.ok = true;
    } catch (const Error& e) {
      cell.error = e.code() + ": " + e.what();
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  const int workers = std::max(1, std::min(threads > 0 ? threads : sweep_threads(), static_cast<int>(jobs.size())));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) run_job(jobs[i]);
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SweepOutcome outcome;
  for (auto& job : jobs) outcome.cells.push_back(std::move(job.cell));
  std::sort(outcome.cells.begin(), outcome.cells.end(), [](const SweepCell& a, const SweepCell& b) {
    return std::tie(a.algo, a.seed, a.horizon) < std::tie(b.algo, b.seed, b.horizon);
  });

  const int m = config.environment.resources();
  std::string csv = "algo,seed,T,status,error,total_loss,regret_vs_xstar,regret_vs_eps_tight";
  for (int i = 1; i <= m; ++i) csv += ",violation_" + std::to_string(i);
  for (int i = 1; i <= m; ++i) csv += ",consumption_" + std::to_string(i);
  csv += ",max_queue_norm,stop_time,drift_diagnostic_mean,drift_diagnostic_se,tightening\r\n";
  for (const auto& c : outcome.cells) {
    csv += csv_field(c.algo) + "," + std::to_string(c.seed) + "," + std::to_string(c.horizon) + ",";
    csv += c.ok ? "ok," : "failed," + csv_field(c.error);
    if (!c.ok) {
      csv += std::string(static_cast<std::size_t>(3 + 2 * m + 5), ',') + "\r\n";
      continue;
    }
    const SummaryStats& s = c.summary;
    csv += "," + format_double(s.total_loss) + "," + format_double(s.regret_vs_xstar) + "," +
           format_double(s.regret_vs_eps_tight);
    for (int i = 0; i < m; ++i) csv += "," + format_double(s.violation(i));
    for (int i = 0; i < m; ++i) csv += "," + format_double(s.total_consumption(i));
    csv += "," + format_double(s.max_queue_norm) + "," + std::to_string(s.stop_time) + "," +
           format_double(s.drift_diagnostic_mean) + "," + format_double(s.drift_diagnostic_se) + "," +
           format_double(s.tightening) + "\r\n";
  }
  write_text(dir / "sweep.csv", csv);
  return outcome;
}

// ---------------------------------------------------------------------------

namespace {

struct SweepRow {
  std::string algo;
  std::uint64_t seed = 0;
  int horizon = 0;
  double total_loss = 0.0;
  Vector violation;
  Vector consumption;
  double max_queue = 0.0;
  int stop_time = 0;
};

std::vector<SweepRow> read_sweep_csv(const fs::path& path, int m) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const std::vector<std::string> header = split_csv_line(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(path.string() + ": missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_algo = column("algo"), c_seed = column("seed"), c_t = column("T"), c_status = column("status"),
                    c_loss = column("total_loss"), c_queue = column("max_queue_norm"), c_stop = column("stop_time");
  std::vector<SweepRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields");
    }
    if (f[c_status] != "ok") continue;
    SweepRow r;
    r.algo = f[c_algo];
    r.seed = std::stoull(f[c_seed]);
    r.horizon = std::stoi(f[c_t]);
    r.total_loss = std::stod(f[c_loss]);
    r.max_queue = std::stod(f[c_queue]);
    r.stop_time = std::stoi(f[c_stop]);
    r.violation.resize(m);
    r.consumption.resize(m);
    for (int i = 0; i < m; ++i) {
      r.violation(i) = std::stod(f[column("violation_" + std::to_string(i + 1))]);
      r.consumption(i) = std::stod(f[column("consumption_" + std::to_string(i + 1))]);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

Report build_report(const std::string& sweep_dir) {
  const fs::path dir(sweep_dir);
  const ExperimentConfig config = load_config((dir / "config.json").string());
  const int m = config.environment.resources();
  const std::vector<SweepRow> rows = read_sweep_csv(dir / "sweep.csv", m);

  Report report;
  std::map<std::pair<std::uint64_t, int>, std::optional<double>> best_loss;
  for (const auto& r : rows) best_loss[{r.seed, r.horizon}];
  for (auto& [key, value] : best_loss) {
    try {
      const auto env = realize_environment(config, key.first, key.second);
      value = solve_hindsight(config, *env, 0.0).solution.objective;
    } catch (const std::exception& e) {
      report.missing_oracles.push_back("seed " + std::to_string(key.first) + ", T " + std::to_string(key.second) +
                                       ": " + e.what());
    }
  }

  std::map<std::pair<std::string, int>, std::vector<const SweepRow*>> groups;
  for (const auto& r : rows) {
    if (best_loss.at({r.seed, r.horizon})) groups[{r.algo, r.horizon}].push_back(&r);
  }
  for (const auto& [key, members] : groups) {
    ReportRow row;
    row.algo = key.first;
    row.horizon = key.second;
    row.seeds = static_cast<int>(members.size());
    std::vector<double> regrets, violations, queues, stops, losses;
    Vector mean_consumption = Vector::Zero(m);
    for (const SweepRow* r : members) {
      regrets.push_back(r->total_loss - *best_loss.at({r->seed, r->horizon}));
      violations.push_back(r->violation.maxCoeff());
      queues.push_back(r->max_queue);
      stops.push_back(r->stop_time);
      losses.push_back(r->total_loss);
      mean_consumption += r->consumption / static_cast<double>(members.size());
    }
    const MeanSe regret = mean_and_standard_error(regrets);
    const MeanSe viol = mean_and_standard_error(violations);
    row.regret_mean = regret.mean;
    row.regret_se = regret.se;
    row.violation_mean = viol.mean;
    row.violation_se = viol.se;
    if (config.mode == BudgetMode::Soft) {
      const Vector total = config.budget_per_round * static_cast<double>(row.horizon);
      row.violation_of_mean = (mean_consumption - total).cwiseMax(0.0).maxCoeff();
    }
    row.max_queue_mean = mean_and_standard_error(queues).mean;
    row.stop_time_mean = mean_and_standard_error(stops).mean;
    row.total_loss_mean = mean_and_standard_error(losses).mean;
    report.rows.push_back(row);
  }

  // Best-tuned safe baseline: per horizon, the explore grid point with the
  // lowest mean loss among those without violation.
  std::map<int, const ReportRow*> best_safe;
  std::set<std::string> safe_labels;
  for (const auto& row : report.rows) {
    if (row.algo.rfind("safeproj", 0) != 0) continue;
    safe_labels.insert(row.algo);
    const ReportRow*& best = best_safe[row.horizon];
    auto rank = [](const ReportRow* r) { return std::make_pair(r->violation_mean > 0.0, r->total_loss_mean); };
    if (best == nullptr || rank(&row) < rank(best)) best = &row;
  }
  if (safe_labels.size() >= 2) {
    std::vector<ReportRow> extra;
    for (const auto& [T, row] : best_safe) {
      ReportRow copy = *row;
      copy.algo = "safeproj-best";
      extra.push_back(copy);
    }
    report.rows.insert(report.rows.end(), extra.begin(), extra.end());
  }

  std::map<std::string, std::vector<std::pair<double, double>>> curves;
  for (const auto& row : report.rows) curves[row.algo].emplace_back(row.horizon, row.regret_mean);
  for (auto& row : report.rows) {
    const auto& points = curves[row.algo];
    const bool usable = points.size() >= 2 && std::all_of(points.begin(), points.end(), [](const auto& p) {
      return p.second > 0.0;
    });
    if (usable) row.regret_slope = loglog_slope(points).slope;
  }

  std::string csv =
      "algo,T,regret_mean,regret_se,violation_mean,violation_se,max_queue_mean,stop_time_mean,regret_slope,seeds,"
      "total_loss_mean,violation_of_mean\r\n";
  std::string md = "# Sweep report\n\nMode: " + to_string(config.mode) +
                   ". Regret is measured against the best fixed feasible decision in hindsight.\n\n"
                   "| algo | T | seeds | regret | violation | max queue | stop time | total loss | slope |\n"
                   "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : report.rows) {
    csv += csv_field(r.algo) + "," + std::to_string(r.horizon) + "," + format_double(r.regret_mean) + "," +
           format_double(r.regret_se) + "," + format_double(r.violation_mean) + "," + format_double(r.violation_se) +
           "," + format_double(r.max_queue_mean) + "," + format_double(r.stop_time_mean) + "," +
           optional_cell(r.regret_slope) + "," + std::to_string(r.seeds) + "," + format_double(r.total_loss_mean) +
           "," + format_double(r.violation_of_mean) + "\r\n";
    char buf[512];
    std::snprintf(buf, sizeof buf, "| %s | %d | %d | %.4g ± %.2g | %.4g ± %.2g | %.4g | %.1f | %.6g | %s |\n",
                  r.algo.c_str(), r.horizon, r.seeds, r.regret_mean, r.regret_se, r.violation_mean, r.violation_se,
                  r.max_queue_mean, r.stop_time_mean, r.total_loss_mean,
                  r.regret_slope ? format_double(std::round(*r.regret_slope * 1000) / 1000).c_str() : "-");
    md += buf;
  }
  if (!report.missing_oracles.empty()) {
    md += "\nMissing hindsight solutions:\n\n";
    for (const auto& e : report.missing_oracles) md += "- " + e + "\n";
  }
  write_text(dir / "report.csv", csv);
  write_text(dir / "report.md", md);
  return report;
}

}  // namespace selo
