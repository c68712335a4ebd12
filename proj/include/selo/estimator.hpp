#pragma once

#include "selo/core.hpp"

namespace selo {

// Row-wise regularized least squares for the unknown consumption matrix:
//   gram  = regularizer * I + sum_s x_s x_s^T
//   cross = sum_s o_s x_s^T
//   a_bar = cross * gram^{-1}
// The inverse is maintained by Sherman-Morrison updates and rebuilt from
// `gram` every kRefreshPeriod updates.
class RlsState {
 public:
  static constexpr int kRefreshPeriod = 64;

  static RlsState init(int dimension, int resources, double regularizer);

  // Rebuilds a state from raw moments, e.g. when replaying a stored history.
  static RlsState from_moments(Matrix cross, Matrix gram, double regularizer, long samples_seen = 0);

  void update(const Vector& x, const Vector& observation);

  int dimension() const { return static_cast<int>(gram_.rows()); }
  int resources() const { return static_cast<int>(cross_.rows()); }
  double regularizer() const { return regularizer_; }
  long samples_seen() const { return samples_seen_; }

  const Matrix& a_bar() const { return a_bar_; }
  const Matrix& gram() const { return gram_; }
  const Matrix& gram_inv() const { return gram_inv_; }
  const Matrix& cross() const { return cross_; }

  // sqrt(x^T gram^{-1} x)
  double weighted_norm(const Vector& x) const;

 private:
  RlsState() = default;
  void refresh_inverse();

  Matrix a_bar_;
  Matrix gram_;
  Matrix gram_inv_;
  Matrix cross_;
  double regularizer_ = 1.0;
  long samples_seen_ = 0;
};

inline RlsState rls_init(int dimension, int resources, double regularizer) {
  return RlsState::init(dimension, resources, regularizer);
}

inline RlsState rls_update(RlsState state, const Vector& x, const Vector& observation) {
  state.update(x, observation);
  return state;
}

struct ConfidenceConfig {
  double alpha_scale = 1.0;
  int horizon = 2;
  // The confidence event fails with probability horizon^-delta_exponent.
  double delta_exponent = 3.0;
};

/// alpha = alpha_scale * (sqrt(delta_exponent * ln T) + sqrt(regularizer)).
/// Time-uniform: it does not shrink with the number of samples.
double confidence_radius(const ConfidenceConfig& cfg, const RlsState& state);

/// a_bar x + alpha ||x||_{gram^-1} 1 - b, the bonus shared by every row.
Vector pessimistic_gap(const RlsState& state, double alpha, const Vector& x, const Vector& per_round_budget);
Vector pessimistic_gap(const RlsState& state, const ConfidenceConfig& cfg, const Vector& x,
                       const Vector& per_round_budget);

}  // namespace selo
