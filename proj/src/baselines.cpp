#include "selo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "selo/subproblem.hpp"

namespace selo {

namespace {

constexpr double kNormSmoothing = 1e-12;

double max_gap(const RlsState& rls, double alpha, const Vector& x, const Vector& b) {
  return pessimistic_gap(rls, alpha, x, b).maxCoeff();
}

double default_step(const FeasibleSet& set, double max_grad_norm, int horizon) {
  const double scale = max_grad_norm > 0.0 ? max_grad_norm : 1.0;
  return diameter(set) / (scale * std::sqrt(static_cast<double>(horizon)));
}

}  // namespace

SafeProjectionResult project_safe_set(const RlsState& rls, double alpha, const Vector& y, const FeasibleSet& set,
                                      const Vector& per_round_budget, const SafeProjConfig& cfg) {
  require(y.size() == set.dimension() && rls.dimension() == set.dimension(), "project_safe_set: dimension mismatch");
  require(cfg.feas_tol > 0.0 && cfg.penalty_growth > 1.0, "project_safe_set: bad configuration");

  const Vector anchor = project(set, Vector::Zero(set.dimension()));
  if (max_gap(rls, alpha, anchor, per_round_budget) > 0.0) {
    throw SafeSetEmpty("pessimistic safe set is empty: the anchor project(set, 0) violates the budget");
  }

  Vector x = project(set, y);
  if (max_gap(rls, alpha, x, per_round_budget) <= 0.0) return {x, false};

  const Matrix& m = rls.gram_inv();
  const Matrix& a = rls.a_bar();
  const int rows = rls.resources();
  Vector multipliers = Vector::Zero(rows);
  double rho = 1.0;
  double previous_violation = std::numeric_limits<double>::infinity();

  for (int outer = 0; outer < 60; ++outer) {
    auto augmented = [&](const Vector& z) {
      const Vector mz = m * z;
      const double norm = std::sqrt(z.dot(mz) + kNormSmoothing);
      const Vector shifted =
          (multipliers + rho * ((a * z).array() + alpha * norm - per_round_budget.array()).matrix()).cwiseMax(0.0);
      const double value = 0.5 * (z - y).squaredNorm() +
                           (shifted.squaredNorm() - multipliers.squaredNorm()) / (2.0 * rho);
      Vector grad = (z - y) + a.transpose() * shifted + (shifted.sum() * alpha / norm) * mz;
      return std::make_pair(value, grad);
    };
    PgdOptions options;
    options.initial_step = 1.0 / (1.0 + rho);
    options.tol = 1e-10;
    options.max_iterations = 2000;
    x = minimize_projected(set, x, augmented, options).x;

    const Vector gap = pessimistic_gap(rls, alpha, x, per_round_budget);
    multipliers = (multipliers + rho * gap).cwiseMax(0.0);
    const double violation = std::max(0.0, gap.maxCoeff());
    if (violation <= cfg.feas_tol) return {x, false};
    if (violation > 0.25 * previous_violation) rho *= cfg.penalty_growth;
    previous_violation = violation;
  }

  // Stalled: keep the feasible part of the segment anchor -> x (gap is convex,
  // so the feasible parameters form an interval containing 0).
  double lo = 0.0;
  double hi = 1.0;
  for (int k = 0; k < 80; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (max_gap(rls, alpha, anchor + mid * (x - anchor), per_round_budget) <= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {anchor + lo * (x - anchor), true};
}

SafeProjectionPolicy::SafeProjectionPolicy(FeasibleSet set, BudgetSpec budget, SafeProjConfig cfg,
                                           double alpha_scale, double regularizer, double delta_exponent)
    : set_(std::move(set)),
      cfg_(cfg),
      tracker_(std::move(budget)),
      rls_(RlsState::init(set_.dimension(), tracker_.budget().resources(), regularizer)),
      x_prev_(project(set_, Vector::Zero(set_.dimension()))),
      last_grad_(Vector::Zero(set_.dimension())) {
  require(cfg_.explore_rounds >= 0 && cfg_.explore_rounds < tracker_.budget().horizon,
          "safeproj: explore_rounds must lie in [0, horizon)");
  const ConfidenceConfig confidence{alpha_scale, std::max(tracker_.budget().horizon, 2), delta_exponent};
  alpha_ = confidence_radius(confidence, rls_);
}

Phase SafeProjectionPolicy::phase() const {
  if (tracker_.exhausted()) return Phase::Stopped;
  return round_ < cfg_.explore_rounds ? Phase::Explore : Phase::Main;
}

double SafeProjectionPolicy::step_size() const {
  return cfg_.step_size > 0.0 ? cfg_.step_size : default_step(set_, max_grad_norm_, tracker_.budget().horizon);
}

DecisionVector SafeProjectionPolicy::decide(Rng& rng) {
  switch (phase()) {
    case Phase::Stopped:
      throw DecideAfterStop("safeproj: decide() called after the hard budget ran out");
    case Phase::Explore:
      return sample_exploration(set_, rng);
    case Phase::Main:
      break;
  }
  SafeProjectionResult result = project_safe_set(rls_, alpha_, x_prev_ - step_size() * last_grad_, set_,
                                                 tracker_.budget().per_round, cfg_);
  if (result.used_anchor) ++anchor_fallbacks_;
  return std::move(result.x);
}

RoundReport SafeProjectionPolicy::observe(const DecisionVector& x, const LossFeedback& loss,
                                          const Vector& consumption) {
  require(x.size() == set_.dimension() && loss.gradient.size() == set_.dimension(), "safeproj: dimension mismatch");
  RoundReport report;
  report.phase = phase();
  report.queue_before = Vector::Zero(rls_.resources());
  report.queue_after = report.queue_before;
  report.gap = pessimistic_gap(rls_, alpha_, x, tracker_.budget().per_round);

  rls_.update(x, consumption);
  x_prev_ = x;
  last_grad_ = loss.gradient;
  max_grad_norm_ = std::max(max_grad_norm_, loss.gradient.norm());
  ++round_;
  tracker_.record(consumption);
  return report;
}

DecisionVector greedy_ogd_step(const FeasibleSet& set, const DecisionVector& x, const Vector& grad, double step) {
  require(step >= 0.0, "greedy_ogd_step: step must be nonnegative");
  return project(set, x - step * grad);
}

GreedyOgdPolicy::GreedyOgdPolicy(FeasibleSet set, BudgetSpec budget, double step_size)
    : set_(std::move(set)),
      tracker_(std::move(budget)),
      step_size_(step_size),
      x_(project(set_, 0.5 * (set_.lower_bounds() + set_.upper_bounds()))) {}

DecisionVector GreedyOgdPolicy::decide(Rng&) {
  if (tracker_.exhausted()) throw DecideAfterStop("greedy: decide() called after the hard budget ran out");
  return x_;
}

RoundReport GreedyOgdPolicy::observe(const DecisionVector& x, const LossFeedback& loss, const Vector& consumption) {
  require(x.size() == set_.dimension() && loss.gradient.size() == set_.dimension(), "greedy: dimension mismatch");
  RoundReport report;
  report.phase = Phase::Main;
  report.queue_before = Vector::Zero(tracker_.budget().resources());
  report.queue_after = report.queue_before;
  report.gap = Vector::Zero(tracker_.budget().resources());

  max_grad_norm_ = std::max(max_grad_norm_, loss.gradient.norm());
  const double step = step_size_ > 0.0 ? step_size_ : default_step(set_, max_grad_norm_, tracker_.budget().horizon);
  x_ = greedy_ogd_step(set_, x, loss.gradient, step);
  tracker_.record(consumption);
  return report;
}

}  // namespace selo
