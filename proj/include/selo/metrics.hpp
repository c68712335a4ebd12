#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "selo/core.hpp"
#include "selo/environment.hpp"
#include "selo/policy.hpp"

namespace selo {

struct TraceRecord {
  int t = 0;
  Phase phase = Phase::Main;
  DecisionVector x;
  double loss = 0.0;
  Vector gradient;
  Vector consumption;
  Vector queue;       // Q_t
  Vector queue_next;  // Q_{t+1}
  Vector gap;         // pessimistic gap of x_t
};

struct ExperimentTrace {
  std::string algo;
  std::uint64_t seed = 0;
  int horizon = 0;
  BudgetMode mode = BudgetMode::Soft;
  int stop_time = 0;  // last round played before a hard stop, or the horizon
  HyperParams params;
  std::vector<TraceRecord> rounds;

  Vector total_consumption() const;
  double total_loss() const;
  int resources() const;
};

/// sum_t (f_t(x_t) - comparator_loss_t) over every recorded round, including
/// post-stop rounds (which carry the stop decision's loss).
double regret(const ExperimentTrace& trace, const std::vector<double>& comparator_losses);
double regret(const ExperimentTrace& trace, const Environment& env, const Vector& comparator);

/// Per-round comparator losses f_t(x) for t = 1..env.horizon().
std::vector<double> comparator_losses(const Environment& env, const Vector& x);

/// max(sum_t o_t - b_T, 0); ModeMismatch for hard budgets.
Vector violation(const ExperimentTrace& trace, const BudgetSpec& budget);

struct DriftDiagnostic {
  std::vector<int> rounds;
  std::vector<double> series;
  std::vector<double> running_mean;
  double mean = 0.0;
  double standard_error = 0.0;
  double gradient_bound = 0.0;  // F, the largest observed gradient norm
};

/// Per-round "one-step regret + drift" bound residual on main-phase rounds:
///   V (f_t(x_t) - f_t(x)) + Delta_t - <Q_t, A x - b> - D(x, x_t, x_{t+1}) / (2 eta) - F^2
/// with Delta_t = (|Q_{t+1}|^2 - |Q_t|^2) / 2 and D(x, y, z) = |x - y|^2 - |x - z|^2.
DriftDiagnostic drift_diagnostic(const ExperimentTrace& trace, const Vector& comparator,
                                 const std::vector<double>& comparator_losses, const Matrix& A, const Vector& b);

struct ClampIdentityCheck {
  int rounds_checked = 0;
  int second_order_failures = 0;  // |Q'|^2/2 - |Q|^2/2 > <Q, s> + |s|^2/2
  int first_order_failures = 0;   // |Q'|^2/2 - |Q|^2/2 > <Q, s>
  double worst_second_order_excess = -std::numeric_limits<double>::infinity();
};

/// Replays Q_{t+1} = max(Q_t + s_t, 0), s_t = gap_t + xi 1, on main-phase
/// rounds and counts where the drift exceeds its bounds by more than roundoff
/// (1e-12 relative to the squared queue norms).
ClampIdentityCheck check_clamp_identity(const ExperimentTrace& trace);

struct SlopeFit {
  double slope = 0.0;
  int used = 0;
  int excluded = 0;  // nonpositive values dropped
};

/// Least-squares slope of ln(value) against ln(T).
SlopeFit loglog_slope(const std::vector<std::pair<double, double>>& points);

double max_queue_norm(const ExperimentTrace& trace);

struct SummaryStats {
  static constexpr int kSchemaVersion = 1;

  double total_loss = 0.0;
  double regret_vs_xstar = 0.0;
  double regret_vs_eps_tight = 0.0;
  Vector total_consumption;
  Vector violation;  // zeros in hard mode
  double max_queue_norm = 0.0;
  int stop_time = 0;
  double drift_diagnostic_mean = 0.0;
  double drift_diagnostic_se = 0.0;
  double tightening = 0.0;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_and_standard_error(const std::vector<double>& values);

}  // namespace selo
