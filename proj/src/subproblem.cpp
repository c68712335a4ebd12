#include "selo/subproblem.hpp"

#include <cmath>
#include <utility>

namespace selo {

namespace {

// Terms of the objective that do not depend on x, hoisted out of the solver loop.
struct Linearized {
  Vector linear;  // V g + a_bar^T Q
  double bonus_weight;  // sum(Q) * alpha
};

Linearized linearize(const SubproblemSpec& spec) {
  return {spec.V * spec.loss_gradient + spec.rls.a_bar().transpose() * spec.queue,
          spec.queue.sum() * spec.alpha};
}

std::pair<double, Vector> evaluate(const SubproblemSpec& spec, const Linearized& lin, const Vector& x) {
  const Vector mx = spec.rls.gram_inv() * x;
  const double smoothed = std::sqrt(x.dot(mx) + spec.smoothing_eps);
  const Vector delta = x - spec.x_prev;
  const double value =
      lin.linear.dot(x) + lin.bonus_weight * smoothed + delta.squaredNorm() / (2.0 * spec.eta);
  Vector grad = lin.linear + (lin.bonus_weight / smoothed) * mx + delta / spec.eta;
  return {value, std::move(grad)};
}

}  // namespace

void SubproblemSpec::validate() const {
  const int d = set.dimension();
  require(loss_gradient.size() == d && x_prev.size() == d, "subproblem: vector dimension mismatch");
  require(rls.dimension() == d && rls.resources() == queue.size(), "subproblem: estimator shape mismatch");
  require(all_finite(loss_gradient) && all_finite(x_prev) && all_finite(queue), "subproblem: non-finite input");
  require((queue.array() >= 0.0).all(), "subproblem: queue must be nonnegative");
  require(alpha >= 0.0 && V > 0.0 && eta > 0.0 && tol > 0.0 && smoothing_eps > 0.0,
          "subproblem: scalar parameters out of range");
  require(max_iterations >= 1, "subproblem: max_iterations must be positive");
}

double objective_value(const SubproblemSpec& spec, const Vector& x) {
  return evaluate(spec, linearize(spec), x).first;
}

Vector objective_gradient(const SubproblemSpec& spec, const Vector& x) {
  return evaluate(spec, linearize(spec), x).second;
}

SubproblemResult solve_subproblem(const SubproblemSpec& spec) {
  spec.validate();
  const Linearized lin = linearize(spec);
  PgdOptions options;
  options.initial_step = spec.eta;
  options.tol = spec.tol;
  options.max_iterations = spec.max_iterations;
  PgdResult pgd = minimize_projected(
      spec.set, spec.x_prev, [&](const Vector& x) { return evaluate(spec, lin, x); }, options);
  return {std::move(pgd.x), pgd.iterations, pgd.gradient_mapping, pgd.converged};
}

bool certify_optimality(const SubproblemSpec& spec, const Vector& x_opt, int probes, Rng& rng) {
  require(spec.set.contains(x_opt, 1e-9), "certify_optimality: x_opt must lie in the set");
  if (diameter(spec.set) == 0.0) return true;
  const Linearized lin = linearize(spec);
  const double h_opt = evaluate(spec, lin, x_opt).first;
  for (int k = 0; k < probes; ++k) {
    const Vector x = sample_uniform(spec.set, rng);
    const double dist = (x - x_opt).norm();
    const double bound = evaluate(spec, lin, x).first - dist * dist / (2.0 * spec.eta) + spec.tol * dist;
    if (h_opt > bound) return false;
  }
  return true;
}

}  // namespace selo
