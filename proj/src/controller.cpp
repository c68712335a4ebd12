#include "selo/controller.hpp"

#include <algorithm>
#include <cmath>

namespace selo {

HyperParams default_hyperparams(int horizon, double beta, const HyperOverrides& overrides) {
  require(horizon >= 4, "default_hyperparams: horizon must be at least 4");
  require(beta > 0.0 && beta <= 1.0, "default_hyperparams: Slater margin beta must lie in (0, 1]");
  const double T = static_cast<double>(horizon);
  const double log_t = std::log(T);

  HyperParams p;
  p.horizon = horizon;
  p.V = overrides.V.value_or(overrides.V_scale * std::sqrt(T));
  p.eta = overrides.eta.value_or(overrides.eta_scale / T);
  p.xi = overrides.xi.value_or(overrides.xi_scale * log_t * log_t / std::sqrt(T));
  p.T0 = overrides.T0.value_or(static_cast<int>(std::ceil(overrides.T0_scale * log_t / beta)));
  p.alpha_scale = overrides.alpha_scale;
  p.validate();
  return p;
}

Vector pacing_update(const Vector& queue, const Vector& gap, double xi) {
  require(queue.size() == gap.size(), "pacing_update: queue and gap sizes differ");
  return ((queue + gap).array() + xi).cwiseMax(0.0).matrix();
}

SeloController::SeloController(FeasibleSet set, HyperParams params, BudgetSpec budget, EstimatorOptions options)
    : set_(std::move(set)),
      params_(params),
      options_(options),
      tracker_(std::move(budget)),
      state_{0,
             project(set_, Vector::Zero(set_.dimension())),
             Vector::Zero(tracker_.budget().resources()),
             RlsState::init(set_.dimension(), tracker_.budget().resources(), options.regularizer),
             Vector::Zero(set_.dimension()),
             Phase::Explore} {
  params_.validate();
  const ConfidenceConfig cfg{params_.alpha_scale, std::max(params_.horizon, 2), options_.delta_exponent};
  alpha_ = confidence_radius(cfg, state_.rls);
  if (params_.T0 == 0) state_.phase = Phase::Main;
}

DecisionVector SeloController::decide(Rng& rng) {
  if (state_.phase == Phase::Stopped) throw DecideAfterStop("selo: decide() called after the hard budget ran out");
  DecisionVector x;
  if (state_.phase == Phase::Explore) {
    x = sample_exploration(set_, rng);
  } else {
    SubproblemSpec spec{state_.last_grad, state_.queue, state_.rls, alpha_, state_.x_prev,
                        params_.V,        params_.eta,  set_};
    spec.smoothing_eps = options_.smoothing_eps;
    spec.tol = options_.solver_tol;
    spec.max_iterations = options_.solver_max_iterations;
    SubproblemResult result = solve_subproblem(spec);
    if (!result.converged) ++solver_failures_;
    x = std::move(result.x);
  }
  pending_ = x;
  return x;
}

RoundReport SeloController::observe(const DecisionVector& x, const LossFeedback& loss, const Vector& consumption) {
  require(pending_.has_value(), "selo: observe() without a pending decision");
  require(x.size() == pending_->size() && x == *pending_, "selo: observed decision differs from the pending one");
  require(loss.gradient.size() == set_.dimension() && all_finite(loss.gradient), "selo: bad loss gradient");
  pending_.reset();

  RoundReport report;
  report.phase = state_.phase;
  report.queue_before = state_.queue;
  // The pacing uses the estimator that produced x_t, before it absorbs o_t.
  report.gap = pessimistic_gap(state_.rls, alpha_, x, tracker_.budget().per_round);
  if (state_.phase == Phase::Main) {
    state_.queue = pacing_update(state_.queue, report.gap, params_.xi);
  }
  report.queue_after = state_.queue;

  state_.rls.update(x, consumption);
  state_.last_grad = loss.gradient;
  state_.x_prev = x;
  ++state_.round;
  tracker_.record(consumption);

  if (tracker_.exhausted()) {
    state_.phase = Phase::Stopped;
  } else if (state_.round >= params_.T0) {
    state_.phase = Phase::Main;
  }
  return report;
}

}  // namespace selo
