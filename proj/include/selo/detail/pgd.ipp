#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <utility>

namespace selo {

template <class Evaluate>
PgdResult minimize_projected(const FeasibleSet& set, const Vector& start, Evaluate&& evaluate,
                             const PgdOptions& options) {
  constexpr double kRoundoff = 16.0 * std::numeric_limits<double>::epsilon();
  constexpr double kMinStep = 1e-300;
  constexpr double kMaxStep = 1e300;
  constexpr double kCancellation = 1e-10;

  PgdResult result;
  result.x = project(set, start);
  auto [fx, gx] = evaluate(result.x);
  double step = options.initial_step;

  for (int it = 1; it <= options.max_iterations; ++it) {
    Vector trial;
    Vector diff;
    double ft = 0.0;
    Vector gt;
    for (;;) {
      trial = project(set, result.x - step * gx);
      diff = trial - result.x;
      std::tie(ft, gt) = evaluate(trial);
      const double sq = diff.squaredNorm();
      if (sq == 0.0 || step <= kMinStep) break;
      bool accept;
      if (std::abs(ft - fx) > kCancellation * (std::abs(fx) + std::abs(ft))) {
        accept = ft <= fx + gx.dot(diff) + sq / (2.0 * step) + kRoundoff * (std::abs(fx) + std::abs(ft) + 1.0);
      } else {
        // f(trial) - f(x) is mostly roundoff here; test the local curvature
        // <grad f(trial) - grad f(x), diff> <= |diff|^2 / step instead.
        accept = (gt - gx).dot(diff) <= sq / step;
      }
      if (accept) break;
      step *= 0.5;
    }
    result.gradient_mapping = diff.norm() / step;
    result.iterations = it;
    result.x = std::move(trial);
    fx = ft;
    gx = std::move(gt);
    if (result.gradient_mapping <= options.tol) {
      result.value = fx;
      result.converged = true;
      return result;
    }
    step = std::min(2.0 * step, kMaxStep);
  }
  result.value = fx;
  result.converged = false;
  return result;
}

}  // namespace selo
