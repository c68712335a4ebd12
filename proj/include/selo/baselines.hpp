#pragma once

#include <optional>

#include "selo/core.hpp"
#include "selo/estimator.hpp"
#include "selo/policy.hpp"

namespace selo {

struct SafeProjConfig {
  int explore_rounds = 1;
  // <= 0 selects the default D / (F_hat sqrt(T)), F_hat the largest gradient
  // norm observed so far.
  double step_size = 0.0;
  double penalty_growth = 10.0;
  double feas_tol = 1e-6;
};

struct SafeProjectionResult {
  DecisionVector x;
  bool used_anchor = false;  // penalty solve stalled and the anchor segment was used
};

/// Projection of `y` onto the pessimistic safe set {x in set : gap(x) <= 0},
/// gap(x) = a_bar x + alpha ||x||_{gram^-1} - b. Solved with an augmented
/// quadratic penalty whose weight grows geometrically; if the result is still
/// infeasible it is pulled back along the segment towards the feasible anchor
/// project(set, 0). The output always satisfies gap <= feas_tol.
SafeProjectionResult project_safe_set(const RlsState& rls, double alpha, const Vector& y, const FeasibleSet& set,
                                      const Vector& per_round_budget, const SafeProjConfig& cfg);

// Explore-then-project online gradient descent on the pessimistic safe set.
// A stand-in for the anytime-safe family of projection methods.
class SafeProjectionPolicy : public Policy {
 public:
  SafeProjectionPolicy(FeasibleSet set, BudgetSpec budget, SafeProjConfig cfg, double alpha_scale,
                       double regularizer = 1.0, double delta_exponent = 3.0);

  std::string name() const override { return "safeproj"; }
  DecisionVector decide(Rng& rng) override;
  RoundReport observe(const DecisionVector& x, const LossFeedback& loss, const Vector& consumption) override;
  Phase phase() const override;

  const RlsState& rls() const { return rls_; }
  double alpha() const { return alpha_; }
  double step_size() const;
  int anchor_fallbacks() const { return anchor_fallbacks_; }

 private:
  FeasibleSet set_;
  SafeProjConfig cfg_;
  BudgetTracker tracker_;
  RlsState rls_;
  double alpha_;
  int round_ = 0;
  DecisionVector x_prev_;
  Vector last_grad_;
  double max_grad_norm_ = 0.0;
  int anchor_fallbacks_ = 0;
};

/// One unconstrained OGD step: project(set, x - step * grad).
DecisionVector greedy_ogd_step(const FeasibleSet& set, const DecisionVector& x, const Vector& grad, double step);

// Budget-blind projected OGD, started at the centre of the set's bounding box.
class GreedyOgdPolicy : public Policy {
 public:
  // step_size <= 0 selects D / (F_hat sqrt(T)) as for the safe baseline.
  GreedyOgdPolicy(FeasibleSet set, BudgetSpec budget, double step_size = 0.0);

  std::string name() const override { return "greedy"; }
  DecisionVector decide(Rng& rng) override;
  RoundReport observe(const DecisionVector& x, const LossFeedback& loss, const Vector& consumption) override;
  Phase phase() const override { return tracker_.exhausted() ? Phase::Stopped : Phase::Main; }

 private:
  FeasibleSet set_;
  BudgetTracker tracker_;
  double step_size_;
  DecisionVector x_;
  double max_grad_norm_ = 0.0;
};

}  // namespace selo
