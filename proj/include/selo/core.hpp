#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <variant>

#include "selo/errors.hpp"

namespace selo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A point of the decision space. Entries are kept finite by every operation
// that produces one.
using DecisionVector = Eigen::VectorXd;

using Rng = std::mt19937_64;

bool all_finite(const Vector& v);

struct Box {
  Vector lower;
  Vector upper;
};

// {x >= 0, sum(x) = scale}
struct Simplex {
  double scale = 1.0;
};

// {x >= 0, ||x|| <= radius}
struct NonNegativeBall {
  double radius = 1.0;
};

class FeasibleSet {
 public:
  using Variant = std::variant<Box, Simplex, NonNegativeBall>;

  static FeasibleSet box(Vector lower, Vector upper);
  static FeasibleSet unit_box(int dimension);
  static FeasibleSet simplex(int dimension, double scale);
  static FeasibleSet nonnegative_ball(int dimension, double radius);

  int dimension() const { return dimension_; }
  const Variant& variant() const { return variant_; }
  std::string describe() const;

  bool contains(const Vector& x, double tol = 1e-9) const;

  // Componentwise bounds of the smallest axis-aligned box holding the set.
  Vector lower_bounds() const;
  Vector upper_bounds() const;

 private:
  FeasibleSet(int dimension, Variant variant);

  int dimension_;
  Variant variant_;
};

/// Euclidean projection onto `set`. Exact for every supported variant.
DecisionVector project(const FeasibleSet& set, const Vector& y);

/// sup ||x - x'|| over the set.
double diameter(const FeasibleSet& set);

/// Scaled Gaussian direction sigma * g with sigma = diameter / sqrt(d); the
/// exploration decision is its projection onto the set.
Vector exploration_direction(const FeasibleSet& set, Rng& rng);
DecisionVector sample_exploration(const FeasibleSet& set, Rng& rng);

// Uniform draw from the set.
DecisionVector sample_uniform(const FeasibleSet& set, Rng& rng);

struct HyperParams {
  double V = 1.0;
  double eta = 1.0;
  double xi = 0.0;
  double alpha_scale = 1.0;
  int T0 = 0;
  int horizon = 1;

  void validate() const;
};

enum class BudgetMode { Soft, Hard };

std::string to_string(BudgetMode mode);
BudgetMode budget_mode_from_string(const std::string& name);

struct BudgetSpec {
  Vector total;
  Vector per_round;
  BudgetMode mode = BudgetMode::Soft;
  int horizon = 1;

  static BudgetSpec from_per_round(const Vector& per_round, int horizon, BudgetMode mode);
  static BudgetSpec from_total(const Vector& total, int horizon, BudgetMode mode);

  int resources() const { return static_cast<int>(total.size()); }
};

}  // namespace selo
