#pragma once

#include <functional>
#include <utility>

#include "selo/core.hpp"
#include "selo/environment.hpp"

namespace selo {

// (F(x), grad F(x)) for the hindsight objective F = sum_t f_t.
using TotalLoss = std::function<std::pair<double, Vector>(const Vector&)>;

// min_{x in set} F(x)  s.t.  A x <= b - tightening * 1
struct OfflineProblem {
  TotalLoss total_loss;
  Matrix A;
  Vector b;
  FeasibleSet set;
  double tightening = 0.0;
};

/// Sums the realized losses of every round of `env`.
TotalLoss realized_total_loss(const Environment& env);

struct OfflineSolution {
  DecisionVector x;
  Vector dual;
  double objective = 0.0;
  double stationarity = 0.0;  // ||P(x - s (grad F + A^T dual)) - x|| / s, normalized objective
  double slackness = 0.0;     // max_i |dual_i (A x - b + eps)_i|, normalized objective
  double infeasibility = 0.0; // max(0, max_i (A x - b + eps)_i)
  int outer_iterations = 0;
};

/// Projected dual ascent on the augmented Lagrangian with inner projected
/// gradient solves. The objective is normalized by max(1, |grad F(x0)|_inf)
/// internally; `tol` applies to the normalized problem and `dual` is reported
/// in the original units. Throws Infeasible when no point of the set meets the
/// tightened constraints, MaxIter if the KKT tolerances are not met.
OfflineSolution solve_offline(const OfflineProblem& problem, double tol = 1e-7, int max_outer = 200);

/// Exhaustive argmin over a grid with `resolution` intervals per axis, keeping
/// only points that satisfy the tightened constraints. Test oracle; d <= 3.
DecisionVector grid_oracle(const OfflineProblem& problem, int resolution);

/// Lower bound on the Slater margin max_x min_i (b - A x)_i, taken over the
/// set's linear-minimization points for every row, its corners (d <= 12),
/// project(set, 0) and `samples` uniform draws.
double slater_margin(const Matrix& A, const Vector& b, const FeasibleSet& set, int samples, Rng& rng);

}  // namespace selo
