#include "selo/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

namespace selo {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Vector project_simplex(const Vector& y, double scale) {
  const Eigen::Index d = y.size();
  std::vector<double> sorted(y.data(), y.data() + d);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double running = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    running += sorted[j];
    const double candidate = (running - scale) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  return (y.array() - theta).cwiseMax(0.0).matrix();
}

}  // namespace

bool all_finite(const Vector& v) { return v.array().isFinite().all(); }

FeasibleSet::FeasibleSet(int dimension, Variant variant)
    : dimension_(dimension), variant_(std::move(variant)) {}

FeasibleSet FeasibleSet::box(Vector lower, Vector upper) {
  require(lower.size() > 0 && lower.size() == upper.size(), "box bounds must be nonempty and of equal length");
  require(all_finite(lower) && all_finite(upper), "box bounds must be finite");
  require((lower.array() <= upper.array()).all(), "box requires lower <= upper componentwise");
  const int d = static_cast<int>(lower.size());
  return FeasibleSet(d, Box{std::move(lower), std::move(upper)});
}

FeasibleSet FeasibleSet::unit_box(int dimension) {
  require(dimension >= 1, "dimension must be positive");
  return box(Vector::Zero(dimension), Vector::Ones(dimension));
}

FeasibleSet FeasibleSet::simplex(int dimension, double scale) {
  require(dimension >= 1, "dimension must be positive");
  require(scale > 0.0 && std::isfinite(scale), "simplex scale must be positive");
  return FeasibleSet(dimension, Simplex{scale});
}

FeasibleSet FeasibleSet::nonnegative_ball(int dimension, double radius) {
  require(dimension >= 1, "dimension must be positive");
  require(radius > 0.0 && std::isfinite(radius), "ball radius must be positive");
  return FeasibleSet(dimension, NonNegativeBall{radius});
}

std::string FeasibleSet::describe() const {
  std::ostringstream out;
  std::visit(Overloaded{
                 [&](const Box&) { out << "box(d=" << dimension_ << ")"; },
                 [&](const Simplex& s) { out << "simplex(d=" << dimension_ << ", scale=" << s.scale << ")"; },
                 [&](const NonNegativeBall& b) {
                   out << "nonnegative_ball(d=" << dimension_ << ", radius=" << b.radius << ")";
                 },
             },
             variant_);
  return out.str();
}

bool FeasibleSet::contains(const Vector& x, double tol) const {
  if (x.size() != dimension_ || !all_finite(x)) return false;
  return std::visit(
      Overloaded{
          [&](const Box& b) {
            return ((x - b.lower).array() >= -tol).all() && ((b.upper - x).array() >= -tol).all();
          },
          [&](const Simplex& s) { return (x.array() >= -tol).all() && std::abs(x.sum() - s.scale) <= tol; },
          [&](const NonNegativeBall& b) { return (x.array() >= -tol).all() && x.norm() <= b.radius + tol; },
      },
      variant_);
}

Vector FeasibleSet::lower_bounds() const {
  if (const auto* b = std::get_if<Box>(&variant_)) return b->lower;
  return Vector::Zero(dimension_);
}

Vector FeasibleSet::upper_bounds() const {
  return std::visit(Overloaded{
                        [](const Box& b) -> Vector { return b.upper; },
                        [&](const Simplex& s) -> Vector { return Vector::Constant(dimension_, s.scale); },
                        [&](const NonNegativeBall& b) -> Vector { return Vector::Constant(dimension_, b.radius); },
                    },
                    variant_);
}

DecisionVector project(const FeasibleSet& set, const Vector& y) {
  require(y.size() == set.dimension(), "project: dimension mismatch");
  require(all_finite(y), "project: input has non-finite entries");
  return std::visit(Overloaded{
                        [&](const Box& b) -> Vector { return y.cwiseMax(b.lower).cwiseMin(b.upper); },
                        [&](const Simplex& s) -> Vector { return project_simplex(y, s.scale); },
                        [&](const NonNegativeBall& b) -> Vector {
                          // Orthant first, then radial shrink: exact because the
                          // ball is centred at the cone's apex.
                          Vector x = y.cwiseMax(0.0);
                          const double norm = x.norm();
                          if (norm > b.radius) x *= b.radius / norm;
                          return x;
                        },
                    },
                    set.variant());
}

double diameter(const FeasibleSet& set) {
  const int d = set.dimension();
  return std::visit(Overloaded{
                        [](const Box& b) { return (b.upper - b.lower).norm(); },
                        [d](const Simplex& s) { return d >= 2 ? s.scale * std::sqrt(2.0) : 0.0; },
                        [d](const NonNegativeBall& b) { return d >= 2 ? b.radius * std::sqrt(2.0) : b.radius; },
                    },
                    set.variant());
}

Vector exploration_direction(const FeasibleSet& set, Rng& rng) {
  const int d = set.dimension();
  const double sigma = diameter(set) / std::sqrt(static_cast<double>(d));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector g(d);
  for (int i = 0; i < d; ++i) g(i) = gauss(rng);
  return sigma * g;
}

DecisionVector sample_exploration(const FeasibleSet& set, Rng& rng) {
  return project(set, exploration_direction(set, rng));
}

DecisionVector sample_uniform(const FeasibleSet& set, Rng& rng) {
  const int d = set.dimension();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return std::visit(Overloaded{
                        [&](const Box& b) -> Vector {
                          Vector x(d);
                          for (int i = 0; i < d; ++i) x(i) = b.lower(i) + unit(rng) * (b.upper(i) - b.lower(i));
                          return x;
                        },
                        [&](const Simplex& s) -> Vector {
                          std::exponential_distribution<double> expo(1.0);
                          Vector x(d);
                          for (int i = 0; i < d; ++i) x(i) = expo(rng);
                          return s.scale * x / x.sum();
                        },
                        [&](const NonNegativeBall& b) -> Vector {
                          // Uniform on the orthant ball: Gaussian direction folded into
                          // the orthant, radius ~ r * U^(1/d).
                          std::normal_distribution<double> gauss(0.0, 1.0);
                          Vector g(d);
                          do {
                            for (int i = 0; i < d; ++i) g(i) = std::abs(gauss(rng));
                          } while (g.norm() == 0.0);
                          const double radius = b.radius * std::pow(unit(rng), 1.0 / d);
                          return radius * g / g.norm();
                        },
                    },
                    set.variant());
}

void HyperParams::validate() const {
  require(horizon >= 1, "horizon must be positive");
  require(V > 0.0 && std::isfinite(V), "V must be positive");
  require(eta > 0.0 && std::isfinite(eta), "eta must be positive");
  require(xi >= 0.0 && std::isfinite(xi), "xi must be nonnegative");
  require(alpha_scale > 0.0 && std::isfinite(alpha_scale), "alpha_scale must be positive");
  require(T0 >= 0, "T0 must be nonnegative");
  require(T0 < horizon, "T0 must be smaller than the horizon");
}

std::string to_string(BudgetMode mode) { return mode == BudgetMode::Soft ? "soft" : "hard"; }

BudgetMode budget_mode_from_string(const std::string& name) {
  if (name == "soft") return BudgetMode::Soft;
  if (name == "hard") return BudgetMode::Hard;
  throw ContractViolation("unknown budget mode '" + name + "' (expected soft|hard)");
}

BudgetSpec BudgetSpec::from_per_round(const Vector& per_round, int horizon, BudgetMode mode) {
  require(horizon >= 1, "budget horizon must be positive");
  require(per_round.size() >= 1 && all_finite(per_round), "per-round budget must be a finite nonempty vector");
  require((per_round.array() >= 0.0).all() && (per_round.array() <= 1.0).all(),
          "per-round budget entries must lie in [0, 1]");
  return BudgetSpec{per_round * static_cast<double>(horizon), per_round, mode, horizon};
}

BudgetSpec BudgetSpec::from_total(const Vector& total, int horizon, BudgetMode mode) {
  require(horizon >= 1, "budget horizon must be positive");
  BudgetSpec spec = from_per_round(total / static_cast<double>(horizon), horizon, mode);
  spec.total = total;
  return spec;
}

}  // namespace selo
