#include "selo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "selo/subproblem.hpp"

namespace selo {

namespace {

// argmin_{x in set} <c, x>
Vector linear_minimizer(const FeasibleSet& set, const Vector& c) {
  const int d = set.dimension();
  if (const auto* box = std::get_if<Box>(&set.variant())) {
    Vector x(d);
    for (int i = 0; i < d; ++i) x(i) = c(i) > 0.0 ? box->lower(i) : box->upper(i);
    return x;
  }
  if (const auto* simplex = std::get_if<Simplex>(&set.variant())) {
    Eigen::Index best = 0;
    c.minCoeff(&best);
    Vector x = Vector::Zero(d);
    x(best) = simplex->scale;
    return x;
  }
  const auto& ball = std::get<NonNegativeBall>(set.variant());
  const Vector negative = c.cwiseMin(0.0);
  const double norm = negative.norm();
  if (norm == 0.0) return Vector::Zero(d);
  return -ball.radius * negative / norm;
}

double margin_at(const Matrix& A, const Vector& b, const Vector& x) { return (b - A * x).minCoeff(); }

template <class Visit>
void for_each_grid_point(const FeasibleSet& set, int resolution, Visit&& visit) {
  const int d = set.dimension();
  std::vector<int> index(static_cast<std::size_t>(d), 0);
  const Vector lower = set.lower_bounds();
  const Vector upper = set.upper_bounds();
  const auto* simplex = std::get_if<Simplex>(&set.variant());
  Vector x(d);
  for (;;) {
    bool emit = true;
    if (simplex != nullptr) {
      int used = 0;
      for (int i = 0; i + 1 < d; ++i) used += index[static_cast<std::size_t>(i)];
      if (used > resolution) {
        emit = false;
      } else {
        for (int i = 0; i + 1 < d; ++i) x(i) = simplex->scale * index[static_cast<std::size_t>(i)] / resolution;
        x(d - 1) = simplex->scale * (resolution - used) / resolution;
      }
    } else {
      for (int i = 0; i < d; ++i) {
        x(i) = lower(i) + (upper(i) - lower(i)) * index[static_cast<std::size_t>(i)] / resolution;
      }
      emit = set.contains(x, 1e-12);
    }
    if (emit) visit(x);

    // Odometer increment; the simplex enumerates only its first d - 1 axes.
    const int axes = simplex != nullptr ? d - 1 : d;
    int axis = 0;
    while (axis < axes && ++index[static_cast<std::size_t>(axis)] > resolution) {
      index[static_cast<std::size_t>(axis)] = 0;
      ++axis;
    }
    if (axis >= axes) break;
  }
}

}  // namespace

TotalLoss realized_total_loss(const Environment& env) {
  return [&env](const Vector& x) { return env.total_loss(x); };
}

OfflineSolution solve_offline(const OfflineProblem& problem, double tol, int max_outer) {
  const FeasibleSet& set = problem.set;
  const int d = set.dimension();
  const Eigen::Index m = problem.A.rows();
  require(problem.total_loss != nullptr, "solve_offline: missing objective");
  require(problem.A.cols() == d && problem.b.size() == m && m >= 1, "solve_offline: constraint shape mismatch");
  require(problem.tightening >= 0.0 && tol > 0.0, "solve_offline: bad tolerance or tightening");

  const Vector rhs = problem.b.array() - problem.tightening;
  Rng rng(0x5eed);
  if (slater_margin(problem.A, rhs, set, 256, rng) < 0.0 && m == 1) {
    // Single row: the linear minimizer decides feasibility exactly.
    const Vector x_min = linear_minimizer(set, problem.A.row(0).transpose());
    if ((problem.A * x_min - rhs)(0) > tol) {
      throw Infeasible("no point of the set satisfies A x <= b - " + std::to_string(problem.tightening));
    }
  }

  Vector x = project(set, Vector::Zero(d));
  const double scale = std::max(1.0, problem.total_loss(x).second.lpNorm<Eigen::Infinity>());
  auto scaled_loss = [&](const Vector& z) {
    auto [value, grad] = problem.total_loss(z);
    return std::make_pair(value / scale, Vector(grad / scale));
  };

  Vector dual = Vector::Zero(m);
  double rho = 10.0;
  double previous_infeasibility = std::numeric_limits<double>::infinity();
  OfflineSolution sol;
  for (int outer = 1; outer <= max_outer; ++outer) {
    auto augmented = [&](const Vector& z) {
      auto [value, grad] = scaled_loss(z);
      const Vector shifted = (dual + rho * (problem.A * z - rhs)).cwiseMax(0.0);
      value += (shifted.squaredNorm() - dual.squaredNorm()) / (2.0 * rho);
      grad += problem.A.transpose() * shifted;
      return std::make_pair(value, grad);
    };
    PgdOptions options;
    options.initial_step = 1.0 / (1.0 + rho);
    options.tol = 0.1 * tol;
    options.max_iterations = 20000;
    x = minimize_projected(set, x, augmented, options).x;

    const Vector residual = problem.A * x - rhs;
    dual = (dual + rho * residual).cwiseMax(0.0);

    const auto [value, grad] = scaled_loss(x);
    const Vector lagrangian_grad = grad + problem.A.transpose() * dual;
    sol.x = x;
    sol.objective = value * scale;
    sol.stationarity = (project(set, x - lagrangian_grad) - x).norm();
    sol.slackness = (dual.array() * residual.array()).abs().maxCoeff();
    sol.infeasibility = std::max(0.0, residual.maxCoeff());
    sol.outer_iterations = outer;
    if (sol.infeasibility <= tol && sol.stationarity <= tol && sol.slackness <= tol) {
      sol.dual = dual * scale;
      return sol;
    }
    if (sol.infeasibility > 0.25 * previous_infeasibility) rho = std::min(rho * 10.0, 1e12);
    previous_infeasibility = sol.infeasibility;
  }
  sol.dual = dual * scale;
  if (sol.infeasibility > std::sqrt(tol)) {
    throw Infeasible("augmented Lagrangian could not reach the tightened feasible set (residual " +
                     std::to_string(sol.infeasibility) + ")");
  }
  throw MaxIter("solve_offline: KKT tolerances not met after " + std::to_string(max_outer) + " outer iterations");
}

DecisionVector grid_oracle(const OfflineProblem& problem, int resolution) {
  const FeasibleSet& set = problem.set;
  if (set.dimension() > 3) throw DimensionTooLarge("grid_oracle supports d <= 3, got " + std::to_string(set.dimension()));
  require(resolution >= 1, "grid_oracle: resolution must be positive");
  const Vector rhs = problem.b.array() - problem.tightening;

  double best = std::numeric_limits<double>::infinity();
  Vector best_x;
  for_each_grid_point(set, resolution, [&](const Vector& x) {
    if (((problem.A * x - rhs).array() > 1e-12).any()) return;
    const double value = problem.total_loss(x).first;
    if (value < best) {
      best = value;
      best_x = x;
    }
  });
  if (best_x.size() == 0) throw Infeasible("grid_oracle: no feasible grid point");
  return best_x;
}

double slater_margin(const Matrix& A, const Vector& b, const FeasibleSet& set, int samples, Rng& rng) {
  const int d = set.dimension();
  require(A.cols() == d && A.rows() == b.size(), "slater_margin: shape mismatch");
  double best = margin_at(A, b, project(set, Vector::Zero(d)));
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    best = std::max(best, margin_at(A, b, linear_minimizer(set, A.row(i).transpose())));
  }
  best = std::max(best, margin_at(A, b, linear_minimizer(set, A.colwise().sum().transpose())));
  if (const auto* box = std::get_if<Box>(&set.variant()); box != nullptr && d <= 12) {
    for (long mask = 0; mask < (1L << d); ++mask) {
      Vector corner(d);
      for (int i = 0; i < d; ++i) corner(i) = (mask >> i) & 1 ? box->upper(i) : box->lower(i);
      best = std::max(best, margin_at(A, b, corner));
    }
  }
  for (int k = 0; k < samples; ++k) best = std::max(best, margin_at(A, b, sample_uniform(set, rng)));
  return best;
}

}  // namespace selo
