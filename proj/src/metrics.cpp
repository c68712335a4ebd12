#include "selo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace selo {

Vector ExperimentTrace::total_consumption() const {
  Vector total = Vector::Zero(resources());
  for (const auto& r : rounds) total += r.consumption;
  return total;
}

double ExperimentTrace::total_loss() const {
  double total = 0.0;
  for (const auto& r : rounds) total += r.loss;
  return total;
}

int ExperimentTrace::resources() const {
  return rounds.empty() ? 0 : static_cast<int>(rounds.front().consumption.size());
}

double regret(const ExperimentTrace& trace, const std::vector<double>& comparator_losses) {
  double total = 0.0;
  for (const auto& r : trace.rounds) {
    require(r.t >= 1 && static_cast<std::size_t>(r.t) <= comparator_losses.size(),
            "regret: comparator losses do not cover round " + std::to_string(r.t));
    total += r.loss - comparator_losses[static_cast<std::size_t>(r.t - 1)];
  }
  return total;
}

std::vector<double> comparator_losses(const Environment& env, const Vector& x) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(env.horizon()));
  for (int t = 1; t <= env.horizon(); ++t) out.push_back(env.loss(t, x).value);
  return out;
}

double regret(const ExperimentTrace& trace, const Environment& env, const Vector& comparator) {
  return regret(trace, comparator_losses(env, comparator));
}

Vector violation(const ExperimentTrace& trace, const BudgetSpec& budget) {
  if (budget.mode == BudgetMode::Hard) {
    throw ModeMismatch("violation is undefined under a hard budget; use the stop time instead");
  }
  if (trace.rounds.empty()) return Vector::Zero(budget.resources());
  require(trace.resources() == budget.resources(), "violation: budget dimension mismatch");
  return (trace.total_consumption() - budget.total).cwiseMax(0.0);
}

DriftDiagnostic drift_diagnostic(const ExperimentTrace& trace, const Vector& comparator,
                                 const std::vector<double>& comparator_losses, const Matrix& A, const Vector& b) {
  DriftDiagnostic out;
  for (const auto& r : trace.rounds) out.gradient_bound = std::max(out.gradient_bound, r.gradient.norm());
  const double f_sq = out.gradient_bound * out.gradient_bound;
  const Vector slack = A * comparator - b;
  const double V = trace.params.V;
  const double eta = trace.params.eta;

  for (std::size_t k = 0; k < trace.rounds.size(); ++k) {
    const TraceRecord& r = trace.rounds[k];
    if (r.phase != Phase::Main) continue;
    // The last round has no successor decision; D(x, x_t, x_t) = 0.
    const Vector& x_next = k + 1 < trace.rounds.size() ? trace.rounds[k + 1].x : r.x;
    const double drift = 0.5 * (r.queue_next.squaredNorm() - r.queue.squaredNorm());
    const double prox = (comparator - r.x).squaredNorm() - (comparator - x_next).squaredNorm();
    const double value = V * (r.loss - comparator_losses.at(static_cast<std::size_t>(r.t - 1))) + drift -
                         r.queue.dot(slack) - prox / (2.0 * eta) - f_sq;
    out.rounds.push_back(r.t);
    out.series.push_back(value);
    const double n = static_cast<double>(out.series.size());
    const double previous = out.running_mean.empty() ? 0.0 : out.running_mean.back();
    out.running_mean.push_back(previous + (value - previous) / n);
  }
  const MeanSe stats = mean_and_standard_error(out.series);
  out.mean = stats.mean;
  out.standard_error = stats.se;
  return out;
}

ClampIdentityCheck check_clamp_identity(const ExperimentTrace& trace) {
  ClampIdentityCheck out;
  const double xi = trace.params.xi;
  for (const auto& r : trace.rounds) {
    if (r.phase != Phase::Main) continue;
    const Vector step = r.gap.array() + xi;
    const double drift = 0.5 * (r.queue_next.squaredNorm() - r.queue.squaredNorm());
    const double first_order = r.queue.dot(step);
    const double second_order = first_order + 0.5 * step.squaredNorm();
    // drift is a difference of squares, so roundoff scales with |Q|^2
    const double slack = 1e-12 * (1.0 + r.queue.squaredNorm() + r.queue_next.squaredNorm());
    ++out.rounds_checked;
    if (drift > first_order + slack) ++out.first_order_failures;
    if (drift > second_order + slack) ++out.second_order_failures;
    out.worst_second_order_excess = std::max(out.worst_second_order_excess, drift - second_order);
  }
  return out;
}

SlopeFit loglog_slope(const std::vector<std::pair<double, double>>& points) {
  SlopeFit fit;
  std::vector<std::pair<double, double>> logs;
  for (const auto& [t, value] : points) {
    if (t <= 0.0 || value <= 0.0 || !std::isfinite(value)) {
      ++fit.excluded;
      std::cerr << "warning: loglog_slope drops nonpositive point (" << t << ", " << value << ")\n";
      continue;
    }
    logs.emplace_back(std::log(t), std::log(value));
  }
  fit.used = static_cast<int>(logs.size());
  require(fit.used >= 2, "loglog_slope: need at least two positive points");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : logs) {
    mx += x;
    my += y;
  }
  mx /= fit.used;
  my /= fit.used;
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [x, y] : logs) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  require(sxx > 0.0, "loglog_slope: horizons must not all coincide");
  fit.slope = sxy / sxx;
  return fit;
}

double max_queue_norm(const ExperimentTrace& trace) {
  double best = 0.0;
  for (const auto& r : trace.rounds) best = std::max({best, r.queue.norm(), r.queue_next.norm()});
  return best;
}

MeanSe mean_and_standard_error(const std::vector<double>& values) {
  MeanSe out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  for (double v : values) out.mean += v;
  out.mean /= n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

}  // namespace selo
