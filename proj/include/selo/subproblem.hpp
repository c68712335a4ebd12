#pragma once

#include "selo/core.hpp"
#include "selo/estimator.hpp"

namespace selo {

// Per-round decision problem
//
//   min_{x in set}  V <g, x> + <Q, a_bar x> + sum(Q) alpha sqrt(x^T gram^-1 x + eps)
//                   + ||x - x_prev||^2 / (2 eta)
//
// i.e. the linearized loss plus the queue-weighted pessimistic constraint plus
// the proximal term. Constants (loss offset, <Q, -b>) are dropped since they
// do not move the argmin. The objective is (1/eta)-strongly convex.
struct SubproblemSpec {
  Vector loss_gradient;
  Vector queue;
  const RlsState& rls;
  double alpha;
  DecisionVector x_prev;
  double V;
  double eta;
  const FeasibleSet& set;
  double smoothing_eps = 1e-10;
  double tol = 1e-7;
  int max_iterations = 10000;

  void validate() const;
};

struct SubproblemResult {
  DecisionVector x;
  int iterations = 0;
  double gradient_mapping = 0.0;
  // false when the iteration cap was hit; `x` is then the best iterate.
  bool converged = true;
};

double objective_value(const SubproblemSpec& spec, const Vector& x);
Vector objective_gradient(const SubproblemSpec& spec, const Vector& x);

/// Projected gradient descent with backtracking, started at project(x_prev).
/// Stops once the gradient mapping norm drops below spec.tol.
SubproblemResult solve_subproblem(const SubproblemSpec& spec);

/// Strong-convexity certificate: for `probes` uniform points x of the set,
///   h(x_opt) <= h(x) - ||x - x_opt||^2 / (2 eta) + tol ||x - x_opt||.
/// A zero-diameter set is trivially certified.
bool certify_optimality(const SubproblemSpec& spec, const Vector& x_opt, int probes, Rng& rng);

// Generic projected-gradient minimizer over a FeasibleSet, shared with the
// baselines and the offline oracle. `evaluate` returns (value, gradient).
struct PgdOptions {
  double initial_step = 1.0;
  double tol = 1e-7;
  int max_iterations = 10000;
};

struct PgdResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  double gradient_mapping = 0.0;
  bool converged = true;
};

template <class Evaluate>
PgdResult minimize_projected(const FeasibleSet& set, const Vector& start, Evaluate&& evaluate,
                             const PgdOptions& options);

}  // namespace selo

#include "selo/detail/pgd.ipp"
