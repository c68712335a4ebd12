// End-to-end acceptance run on the default data-center config: one PASS/FAIL
// line per criterion, 1 through 10.
//
// Criterion 7 asks for the first-order drift bound
//   |Q_{t+1}|^2 / 2 - |Q_t|^2 / 2 <= <Q_t, s_t>,  s_t = ghat_t(x_t) + xi 1,
// on every round. Expanding the clamp only gives
//   |max(Q + s, 0)|^2 <= |Q + s|^2 = |Q|^2 + 2 <Q, s> + |s|^2,
// so the bound misses |s|^2 / 2 and fails whenever the queue grows from zero.
// The line reports the literal check (it fails) and the exact clamp identity
// next to it. That known-unattainable line is left out of the exit status;
// every other line must pass.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "selo/experiment.hpp"
#include "selo/subproblem.hpp"

using namespace selo;

namespace {

struct Line {
  int criterion;
  bool pass;
  std::string detail;
  bool counts = true;
};

std::vector<Line> lines;

void report(int criterion, bool pass, const std::string& detail, bool counts = true) {
  lines.push_back({criterion, pass, detail, counts});
  std::printf("criterion %d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* pattern, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), pattern, a);
  return buf;
}

struct Key {
  std::string algo;
  BudgetMode mode;
  std::uint64_t seed;
  int horizon;
  bool operator<(const Key& o) const {
    return std::tie(algo, mode, seed, horizon) < std::tie(o.algo, o.mode, o.seed, o.horizon);
  }
};

double mean_of(const std::vector<double>& v) { return mean_and_standard_error(v).mean; }

}  // namespace

int main() {
  const auto started = std::chrono::steady_clock::now();
  ExperimentConfig soft = load_config(SELO_CONFIG_DIR "/dc.json");
  soft.mode = BudgetMode::Soft;
  soft.validate();
  ExperimentConfig hard = soft;
  hard.mode = BudgetMode::Hard;

  const std::vector<int>& horizons = soft.horizons;
  const std::vector<std::uint64_t>& seeds = soft.seeds;
  const int T_max = *std::max_element(horizons.begin(), horizons.end());
  std::vector<std::string> safe_algos;
  for (const auto& a : soft.sweep_algos())
    if (a.rfind("safeproj", 0) == 0) safe_algos.push_back(a);

  // Hindsight solutions, one per (seed, horizon).
  std::map<std::pair<std::uint64_t, int>, OracleResult> oracles;
  for (std::uint64_t seed : seeds) {
    for (int T : horizons) {
      const auto env = realize_environment(soft, seed, T);
      oracles[{seed, T}] = solve_hindsight(soft, *env, 0.0);
    }
  }

  std::vector<Key> keys;
  for (std::uint64_t seed : seeds) {
    for (int T : horizons) {
      keys.push_back({"selo", BudgetMode::Soft, seed, T});
      keys.push_back({"selo", BudgetMode::Hard, seed, T});
      keys.push_back({"greedy", BudgetMode::Soft, seed, T});
      for (const auto& a : safe_algos) keys.push_back({a, BudgetMode::Soft, seed, T});
    }
  }
  std::map<Key, CellResult> cells;
  std::mutex cells_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      const Key& k = keys[i];
      CellResult r = run_cell(k.mode == BudgetMode::Soft ? soft : hard, k.algo, k.seed, k.horizon,
                              &oracles.at({k.seed, k.horizon}));
      const std::lock_guard<std::mutex> lock(cells_mutex);
      cells.emplace(k, std::move(r));
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::max(1, sweep_threads()); ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  auto cell = [&](const std::string& algo, BudgetMode mode, std::uint64_t seed, int T) -> const CellResult& {
    return cells.at({algo, mode, seed, T});
  };

  // 1. Regret slope of the seed-mean SELO regret.
  {
    std::vector<std::pair<double, double>> points;
    std::string detail = "mean regret";
    for (int T : horizons) {
      std::vector<double> r;
      for (auto s : seeds) r.push_back(cell("selo", BudgetMode::Soft, s, T).summary.regret_vs_xstar);
      points.emplace_back(T, mean_of(r));
      detail += fmt(" %.1f", mean_of(r));
    }
    const SlopeFit fit = loglog_slope(points);
    report(1, fit.used == static_cast<int>(horizons.size()) && fit.slope <= 0.75,
           "log-log slope " + fmt("%.3f", fit.slope) + " (<= 0.75); " + detail);
  }

  // 2. Zero soft violation for SELO, positive for greedy.
  {
    bool selo_zero = true, greedy_positive = true;
    std::string detail;
    for (int T : horizons) {
      const int m = soft.environment.resources();
      Vector selo_mean = Vector::Zero(m), greedy_mean = Vector::Zero(m);
      for (auto s : seeds) {
        selo_mean += cell("selo", BudgetMode::Soft, s, T).summary.violation;
        greedy_mean += cell("greedy", BudgetMode::Soft, s, T).summary.violation;
      }
      selo_mean /= static_cast<double>(seeds.size());
      greedy_mean /= static_cast<double>(seeds.size());
      selo_zero = selo_zero && selo_mean.maxCoeff() == 0.0;
      greedy_positive = greedy_positive && (greedy_mean.array() > 0.0).all();
      detail += " T=" + std::to_string(T) + fmt(" selo %.3g", selo_mean.maxCoeff()) +
                fmt(" greedy %.1f", greedy_mean.minCoeff());
    }
    report(2, selo_zero && greedy_positive, "seed-mean violation:" + detail);
  }

  // 3. max |Q_t| / (sqrt(T) ln T) nonincreasing across horizons, every seed.
  {
    int monotone = 0;
    for (auto s : seeds) {
      double previous = std::numeric_limits<double>::infinity();
      bool ok = true;
      for (int T : horizons) {
        const double v = cell("selo", BudgetMode::Soft, s, T).summary.max_queue_norm /
                         (std::sqrt(static_cast<double>(T)) * std::log(static_cast<double>(T)));
        if (v > previous) ok = false;
        previous = v;
      }
      if (ok) ++monotone;
    }
    report(3, monotone == static_cast<int>(seeds.size()),
           std::to_string(monotone) + "/" + std::to_string(seeds.size()) + " seeds nonincreasing");
  }

  // 4. Hard budget: late stops and regret close to the soft run.
  {
    bool stops_ok = true;
    std::string detail;
    for (int T : horizons) {
      std::vector<double> tau;
      for (auto s : seeds) tau.push_back(cell("selo", BudgetMode::Hard, s, T).summary.stop_time);
      const double bound = T - 3.0 * std::sqrt(static_cast<double>(T)) * std::log(static_cast<double>(T));
      stops_ok = stops_ok && mean_of(tau) >= bound;
      detail += " T=" + std::to_string(T) + fmt(" tau %.1f", mean_of(tau)) + fmt(" (>= %.1f)", bound);
    }
    std::vector<double> hard_regret, soft_regret;
    for (auto s : seeds) {
      hard_regret.push_back(cell("selo", BudgetMode::Hard, s, T_max).summary.regret_vs_xstar);
      soft_regret.push_back(cell("selo", BudgetMode::Soft, s, T_max).summary.regret_vs_xstar);
    }
    const double h = mean_of(hard_regret), r = mean_of(soft_regret);
    const bool close = h <= 2.0 * std::abs(r);
    report(4, stops_ok && close,
           "mean stop" + detail + fmt("; hard regret %.1f", h) + fmt(" vs soft %.1f", r) + " at T=" +
               std::to_string(T_max) + " (<= 2x)");
  }

  // 5. SELO delay at most the best safe-projection delay, both without violation.
  {
    bool ok = true;
    std::string detail;
    for (int T : horizons) {
      std::vector<double> selo_loss;
      double selo_violation = 0.0;
      for (auto s : seeds) {
        selo_loss.push_back(cell("selo", BudgetMode::Soft, s, T).summary.total_loss);
        selo_violation += cell("selo", BudgetMode::Soft, s, T).summary.violation.sum();
      }
      double best = std::numeric_limits<double>::infinity();
      std::string best_algo = "none";
      for (const auto& a : safe_algos) {
        std::vector<double> loss;
        double v = 0.0;
        for (auto s : seeds) {
          loss.push_back(cell(a, BudgetMode::Soft, s, T).summary.total_loss);
          v += cell(a, BudgetMode::Soft, s, T).summary.violation.sum();
        }
        if (v == 0.0 && mean_of(loss) < best) {
          best = mean_of(loss);
          best_algo = a;
        }
      }
      ok = ok && selo_violation == 0.0 && mean_of(selo_loss) <= best;
      detail += " T=" + std::to_string(T) + fmt(" selo %.1f", mean_of(selo_loss)) + " " + best_algo +
                fmt(" %.1f", best);
    }
    report(5, ok, "mean total delay:" + detail);
  }

  // 6. Drift diagnostic against the eps-tight comparator.
  {
    int ok = 0, runs = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (auto s : seeds) {
      for (int T : horizons) {
        const SummaryStats& st = cell("selo", BudgetMode::Soft, s, T).summary;
        ++runs;
        const double excess = st.drift_diagnostic_mean - 2.0 * st.drift_diagnostic_se;
        worst = std::max(worst, excess);
        if (excess <= 0.0) ++ok;
      }
    }
    report(6, ok == runs,
           std::to_string(ok) + "/" + std::to_string(runs) + " runs with mean <= 2 se" +
               fmt(" (largest mean - 2 se %.3g)", worst));
  }

  // 7. Drift against <Q, s> on every main-phase round; see the header comment.
  {
    long rounds = 0, first = 0, second = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& [k, c] : cells) {
      if (k.algo != "selo") continue;
      const ClampIdentityCheck check = check_clamp_identity(c.trace);
      rounds += check.rounds_checked;
      first += check.first_order_failures;
      second += check.second_order_failures;
      worst = std::max(worst, check.worst_second_order_excess);
    }
    report(7, first == 0,
           std::to_string(first) + "/" + std::to_string(rounds) +
               " rounds break drift <= <Q, s>; with the +|s|^2/2 term " + std::to_string(second) + " break" +
               fmt(" (largest excess %.3g)", worst) + "; not counted in the exit status",
           false);
  }

  // 8. Solver correctness.
  {
    Rng rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    auto random_rls = [&](int d, int m) {
      RlsState rls = rls_init(d, m, 1.0);
      for (int k = 0; k < 5; ++k) {
        Vector x(d), o(m);
        for (int i = 0; i < d; ++i) x(i) = u(rng);
        for (int i = 0; i < m; ++i) o(i) = u(rng);
        rls.update(x, o);
      }
      return rls;
    };
    const FeasibleSet box2 = FeasibleSet::unit_box(2);
    int grid_match = 0;
    for (int k = 0; k < 50; ++k) {
      const RlsState rls = random_rls(2, 2);
      const SubproblemSpec spec{Vector{{g(rng), g(rng)}}, Vector{{2.0 * u(rng), 2.0 * u(rng)}},
                                rls, 0.5 + 1.5 * u(rng), Vector{{u(rng), u(rng)}}, 0.5 + 1.5 * u(rng),
                                0.2 + 0.8 * u(rng), box2};
      const Vector x = solve_subproblem(spec).x;
      double best = std::numeric_limits<double>::infinity();
      Vector best_x(2), p(2);
      for (int i = 0; i <= 400; ++i) {
        for (int j = 0; j <= 400; ++j) {
          p << i / 400.0, j / 400.0;
          const double v = objective_value(spec, p);
          if (v < best) {
            best = v;
            best_x = p;
          }
        }
      }
      if ((x - best_x).norm() <= 5e-3) ++grid_match;
    }
    const FeasibleSet box3 = FeasibleSet::unit_box(3);
    int certified = 0;
    for (int k = 0; k < 1000; ++k) {
      const RlsState rls = random_rls(3, 2);
      const SubproblemSpec spec{Vector{{g(rng), g(rng), g(rng)}}, Vector{{2.0 * u(rng), 2.0 * u(rng)}}, rls,
                                0.5 + 1.5 * u(rng), Vector{{u(rng), u(rng), u(rng)}}, 0.5 + 1.5 * u(rng),
                                0.2 + 0.8 * u(rng), box3};
      if (certify_optimality(spec, solve_subproblem(spec).x, 100, rng)) ++certified;
    }
    int offline_match = 0, offline_runs = 0;
    for (int d : {1, 2, 3}) {
      const int resolution = d == 3 ? 40 : 200;
      for (int k = 0; k < 20; ++k) {
        Vector c(d), h(d);
        for (int i = 0; i < d; ++i) {
          c(i) = 0.3 + 1.2 * u(rng);
          h(i) = 0.5 + 1.5 * u(rng);
        }
        Matrix A(2, d);
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < d; ++j) A(i, j) = u(rng);
        const OfflineProblem problem{
            [c, h](const Vector& x) {
              const Vector diff = x - c;
              return std::make_pair(0.5 * diff.dot(h.cwiseProduct(diff)), Vector(h.cwiseProduct(diff)));
            },
            A, Vector{{0.2 + 0.6 * u(rng), 0.2 + 0.6 * u(rng)}}, FeasibleSet::unit_box(d), 0.0};
        // Objectives agree within the grid's first-order allowance at spacing delta.
        const OfflineSolution s = solve_offline(problem);
        const double grid_value = problem.total_loss(grid_oracle(problem, resolution)).first;
        const double delta = std::sqrt(static_cast<double>(d)) / resolution;
        const double allowance = 2.0 * problem.total_loss(s.x).second.norm() * delta + 2.0 * delta * delta;
        ++offline_runs;
        if (grid_value >= s.objective - 1e-7 && grid_value - s.objective <= allowance) ++offline_match;
      }
    }
    report(8, grid_match == 50 && certified >= 990 && offline_match == offline_runs,
           "subproblem vs 401^2 grid " + std::to_string(grid_match) + "/50; certificate " +
               std::to_string(certified) + "/1000; offline vs grid " + std::to_string(offline_match) + "/" +
               std::to_string(offline_runs));
  }

  // 9. Estimator: rank-1 inverse drift and pessimism coverage on the SELO runs.
  {
    Rng rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    RlsState rls = rls_init(10, 1, 1.0);
    for (int k = 0; k < 1000; ++k) {
      Vector x(10), o(1);
      for (int i = 0; i < 10; ++i) x(i) = g(rng);
      o(0) = g(rng);
      rls.update(x, o);
    }
    const double drift = (rls.gram_inv() - rls.gram().inverse()).norm();

    // The trace's gap was computed with the estimator that chose x_t; the
    // truth is the environment's mean price row.
    long covered = 0, checked = 0;
    for (const auto& [k, c] : cells) {
      if (k.algo != "selo" || k.mode != BudgetMode::Soft) continue;
      const auto env = realize_environment(soft, k.seed, k.horizon);
      const BudgetSpec budget = soft.budget(k.horizon);
      for (const auto& r : c.trace.rounds) {
        if (r.phase != Phase::Main) continue;
        ++checked;
        const Vector truth = env->mean_consumption() * r.x - budget.per_round;
        if (((r.gap - truth).array() >= 0.0).all()) ++covered;
      }
    }
    const double coverage = checked > 0 ? static_cast<double>(covered) / checked : 0.0;
    report(9, drift <= 1e-8 && coverage >= 0.99,
           fmt("rank-1 vs direct inverse %.2e (<= 1e-8); ", drift) +
               fmt("coverage %.4f", coverage) + " over " + std::to_string(checked) + " main rounds (>= 0.99)");
  }

  // 10. Delay-loss gradients against central differences.
  {
    Rng rng(10);
    const auto env = realize_environment(soft, 1, T_max);
    const FeasibleSet set = soft.feasible_set();
    std::uniform_int_distribution<int> round(1, T_max);
    int ok = 0;
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const int t = round(rng);
      const Vector x = sample_uniform(set, rng);
      const Vector grad = env->loss(t, x).gradient;
      for (int i = 0; i < x.size(); ++i) {
        const double h = 1e-6;
        Vector xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        const double fd = (env->loss(t, xp).value - env->loss(t, xm).value) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - grad(i)) / std::max(1.0, std::abs(grad(i))));
      }
      if (worst <= 1e-5) ++ok;
    }
    report(10, ok == 100, std::to_string(ok) + "/100 points" + fmt(", largest relative error %.2e", worst));
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  int failed = 0;
  for (const auto& l : lines)
    if (l.counts && !l.pass) ++failed;
  std::printf("acceptance: %d counted criteria failed; %.1f s\n", failed, seconds);
  return failed == 0 ? 0 : 1;
}
