#pragma once

#include <optional>

#include "selo/core.hpp"
#include "selo/estimator.hpp"
#include "selo/policy.hpp"
#include "selo/subproblem.hpp"

namespace selo {

// Explicit values win over scale factors; scale factors multiply the
// horizon-dependent defaults.
struct HyperOverrides {
  std::optional<double> V;
  std::optional<double> eta;
  std::optional<double> xi;
  std::optional<int> T0;
  double V_scale = 1.0;
  double eta_scale = 1.0;
  double xi_scale = 1.0;
  double T0_scale = 1.0;
  double alpha_scale = 1.0;
};

/// V = sqrt(T), eta = 1/T, xi = ln(T)^2 / sqrt(T), T0 = ceil(ln(T) / beta),
/// natural logs throughout, each subject to `overrides`.
HyperParams default_hyperparams(int horizon, double beta, const HyperOverrides& overrides = {});

/// Q' = max(Q + gap + xi 1, 0), componentwise.
Vector pacing_update(const Vector& queue, const Vector& gap, double xi);

struct EstimatorOptions {
  double regularizer = 1.0;
  double delta_exponent = 3.0;
  double smoothing_eps = 1e-10;
  double solver_tol = 1e-7;
  int solver_max_iterations = 10000;
};

// Mutable state of the controller between rounds.
struct SeloState {
  int round = 0;  // completed rounds
  DecisionVector x_prev;
  Vector queue;
  RlsState rls;
  Vector last_grad;
  Phase phase = Phase::Explore;
};

class SeloController : public Policy {
 public:
  SeloController(FeasibleSet set, HyperParams params, BudgetSpec budget, EstimatorOptions options = {});

  std::string name() const override { return "selo"; }
  DecisionVector decide(Rng& rng) override;
  RoundReport observe(const DecisionVector& x, const LossFeedback& loss, const Vector& consumption) override;
  Phase phase() const override { return state_.phase; }

  const SeloState& state() const { return state_; }
  const HyperParams& params() const { return params_; }
  const BudgetTracker& budget() const { return tracker_; }
  const FeasibleSet& set() const { return set_; }
  double alpha() const { return alpha_; }
  // Subproblem solves that hit the iteration cap.
  int solver_failures() const { return solver_failures_; }

 private:
  FeasibleSet set_;
  HyperParams params_;
  EstimatorOptions options_;
  BudgetTracker tracker_;
  SeloState state_;
  double alpha_;
  std::optional<DecisionVector> pending_;
  int solver_failures_ = 0;
};

}  // namespace selo
