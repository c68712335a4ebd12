#include "selo/estimator.hpp"

#include <algorithm>
#include <cmath>

namespace selo {

RlsState RlsState::init(int dimension, int resources, double regularizer) {
  require(dimension >= 1 && resources >= 1, "rls_init: dimensions must be positive");
  require(regularizer > 0.0 && std::isfinite(regularizer), "rls_init: regularizer must be positive");
  RlsState s;
  s.regularizer_ = regularizer;
  s.gram_ = regularizer * Matrix::Identity(dimension, dimension);
  s.gram_inv_ = (1.0 / regularizer) * Matrix::Identity(dimension, dimension);
  s.cross_ = Matrix::Zero(resources, dimension);
  s.a_bar_ = Matrix::Zero(resources, dimension);
  return s;
}

RlsState RlsState::from_moments(Matrix cross, Matrix gram, double regularizer, long samples_seen) {
  require(regularizer > 0.0, "from_moments: regularizer must be positive");
  require(gram.rows() == gram.cols() && gram.rows() >= 1, "from_moments: gram must be square");
  require(cross.cols() == gram.rows() && cross.rows() >= 1, "from_moments: cross has wrong shape");
  require(gram.isApprox(gram.transpose(), 1e-12), "from_moments: gram must be symmetric");
  RlsState s;
  s.regularizer_ = regularizer;
  s.gram_ = std::move(gram);
  s.cross_ = std::move(cross);
  s.samples_seen_ = samples_seen;
  s.refresh_inverse();
  return s;
}

void RlsState::update(const Vector& x, const Vector& observation) {
  require(x.size() == dimension(), "rls_update: decision has wrong dimension");
  require(observation.size() == resources(), "rls_update: observation has wrong dimension");
  require(all_finite(x) && all_finite(observation), "rls_update: non-finite input");

  gram_.noalias() += x * x.transpose();
  cross_.noalias() += observation * x.transpose();
  ++samples_seen_;

  if (samples_seen_ % kRefreshPeriod == 0) {
    refresh_inverse();
    return;
  }
  const Vector gx = gram_inv_ * x;
  gram_inv_.noalias() -= (gx * gx.transpose()) / (1.0 + x.dot(gx));
  a_bar_.noalias() = cross_ * gram_inv_;
}

void RlsState::refresh_inverse() {
  const Eigen::LLT<Matrix> llt(gram_);
  require(llt.info() == Eigen::Success, "gram matrix lost positive definiteness");
  gram_inv_ = llt.solve(Matrix::Identity(gram_.rows(), gram_.cols()));
  gram_inv_ = 0.5 * (gram_inv_ + gram_inv_.transpose()).eval();
  a_bar_.noalias() = cross_ * gram_inv_;
}

double RlsState::weighted_norm(const Vector& x) const {
  require(x.size() == dimension(), "weighted_norm: dimension mismatch");
  return std::sqrt(std::max(0.0, x.dot(gram_inv_ * x)));
}

double confidence_radius(const ConfidenceConfig& cfg, const RlsState& state) {
  require(cfg.alpha_scale > 0.0, "confidence_radius: alpha_scale must be positive");
  require(cfg.horizon >= 2, "confidence_radius: horizon must be at least 2");
  require(cfg.delta_exponent > 0.0, "confidence_radius: delta_exponent must be positive");
  const double log_t = std::log(static_cast<double>(cfg.horizon));
  return cfg.alpha_scale * (std::sqrt(cfg.delta_exponent * log_t) + std::sqrt(state.regularizer()));
}

Vector pessimistic_gap(const RlsState& state, double alpha, const Vector& x, const Vector& per_round_budget) {
  require(per_round_budget.size() == state.resources(), "pessimistic_gap: budget has wrong dimension");
  const double bonus = alpha * state.weighted_norm(x);
  return (state.a_bar() * x).array() + bonus - per_round_budget.array();
}

Vector pessimistic_gap(const RlsState& state, const ConfidenceConfig& cfg, const Vector& x,
                       const Vector& per_round_budget) {
  return pessimistic_gap(state, confidence_radius(cfg, state), x, per_round_budget);
}

}  // namespace selo
