#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "selo/core.hpp"
#include "selo/errors.hpp"

using namespace selo;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

Vector random_point(int d, Rng& rng, double spread) {
  std::normal_distribution<double> g(0.0, spread);
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = g(rng);
  return v;
}

std::vector<FeasibleSet> sample_sets() {
  return {FeasibleSet::unit_box(3), FeasibleSet::box(vec({-1.0, 0.0, 2.0}), vec({0.5, 0.0, 3.0})),
          FeasibleSet::simplex(4, 1.0), FeasibleSet::simplex(3, 2.5), FeasibleSet::nonnegative_ball(3, 1.0),
          FeasibleSet::nonnegative_ball(5, 0.3)};
}

}  // namespace

TEST_CASE("box projection fixes interior points and clamps the rest") {
  const FeasibleSet box = FeasibleSet::unit_box(2);
  const Vector inside = project(box, vec({0.5, 0.5}));
  CHECK(inside(0) == 0.5);
  CHECK(inside(1) == 0.5);

  const Vector clamped = project(box, vec({1.7, -0.2}));
  CHECK(clamped(0) == 1.0);
  CHECK(clamped(1) == 0.0);
}

TEST_CASE("simplex projection shifts both coordinates equally") {
  const Vector x = project(FeasibleSet::simplex(2, 1.0), vec({0.8, 0.4}));
  CHECK(x(0) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(x(1) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("nonnegative ball projection") {
  const FeasibleSet ball = FeasibleSet::nonnegative_ball(2, 1.0);
  const Vector x = project(ball, vec({3.0, -4.0}));
  CHECK(x(0) == doctest::Approx(1.0));
  CHECK(x(1) == 0.0);
  const Vector y = project(ball, vec({0.3, 0.4}));
  CHECK(y(0) == 0.3);
  CHECK(y(1) == 0.4);
}

TEST_CASE("projection rejects a dimension mismatch") {
  CHECK_THROWS_AS(project(FeasibleSet::unit_box(2), vec({1.0, 2.0, 3.0})), ContractViolation);
}

TEST_CASE("diameters") {
  CHECK(diameter(FeasibleSet::unit_box(3)) == doctest::Approx(std::sqrt(3.0)));
  CHECK(diameter(FeasibleSet::simplex(2, 1.0)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(diameter(FeasibleSet::simplex(7, 1.0)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(diameter(FeasibleSet::box(Vector::Constant(4, 0.3), Vector::Constant(4, 0.3))) == 0.0);
  CHECK(diameter(FeasibleSet::nonnegative_ball(3, 2.0)) == doctest::Approx(2.0 * std::sqrt(2.0)));
}

TEST_CASE("box with lower > upper is rejected") {
  CHECK_THROWS_AS(FeasibleSet::box(vec({1.0}), vec({0.0})), ContractViolation);
}

TEST_CASE("exploration samples stay in the set and are seed deterministic") {
  for (int d : {1, 2, 10}) {
    const FeasibleSet box = FeasibleSet::unit_box(d);
    Rng rng(7);
    for (int k = 0; k < 200; ++k) CHECK(box.contains(sample_exploration(box, rng)));
  }
  const FeasibleSet box = FeasibleSet::unit_box(3);
  Rng a(42), b(42);
  for (int k = 0; k < 20; ++k) {
    const Vector xa = sample_exploration(box, a);
    const Vector xb = sample_exploration(box, b);
    CHECK(xa == xb);
  }
}

TEST_CASE("exploration directions excite every coordinate") {
  const FeasibleSet box = FeasibleSet::unit_box(2);
  Rng rng(3);
  const int n = 1000;
  Matrix samples(n, 2);
  for (int k = 0; k < n; ++k) samples.row(k) = exploration_direction(box, rng).transpose();
  const Eigen::RowVector2d mean = samples.colwise().mean();
  const Matrix centered = samples.rowwise() - mean;
  const Matrix cov = centered.transpose() * centered / (n - 1);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  // sigma^2 = D^2 / d = 1 for the unit square.
  CHECK(cov(0, 0) == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("projection is nonexpansive") {
  Rng rng(11);
  for (const FeasibleSet& set : sample_sets()) {
    for (int k = 0; k < 300; ++k) {
      const Vector y = random_point(set.dimension(), rng, 2.0);
      const Vector x = sample_uniform(set, rng);
      REQUIRE(set.contains(x));
      CHECK((project(set, y) - x).norm() <= (y - x).norm() + 1e-12);
    }
  }
}

TEST_CASE("projection is idempotent") {
  Rng rng(12);
  for (const FeasibleSet& set : sample_sets()) {
    for (int k = 0; k < 300; ++k) {
      const Vector p = project(set, random_point(set.dimension(), rng, 3.0));
      CHECK(set.contains(p));
      CHECK((project(set, p) - p).norm() <= 1e-12);
    }
  }
}

TEST_CASE("simplex projection sums to the scale and is nonnegative") {
  Rng rng(13);
  for (double scale : {0.5, 1.0, 4.0}) {
    const FeasibleSet simplex = FeasibleSet::simplex(6, scale);
    for (int k = 0; k < 300; ++k) {
      const Vector p = project(simplex, random_point(6, rng, 5.0));
      CHECK(std::abs(p.sum() - scale) <= 1e-10);
      CHECK(p.minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("budget spec per-round and total agree") {
  const BudgetSpec spec = BudgetSpec::from_per_round(vec({0.75, 0.2}), 720, BudgetMode::Soft);
  CHECK(spec.total(0) == doctest::Approx(540.0));
  CHECK(std::abs(spec.per_round(1) - spec.total(1) / 720.0) <= 1e-12);
  CHECK_THROWS_AS(BudgetSpec::from_per_round(vec({1.5}), 10, BudgetMode::Soft), ContractViolation);
  CHECK(budget_mode_from_string("hard") == BudgetMode::Hard);
}

TEST_CASE("hyperparameters must keep T0 below the horizon") {
  HyperParams p;
  p.horizon = 10;
  p.T0 = 10;
  CHECK_THROWS_AS(p.validate(), ContractViolation);
  p.T0 = 9;
  CHECK_NOTHROW(p.validate());
}
