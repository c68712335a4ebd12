#pragma once

#include <string>

#include "selo/core.hpp"

namespace selo {

struct LossFeedback {
  double value = 0.0;
  Vector gradient;
};

enum class Phase { Explore, Main, Stopped };

std::string to_string(Phase phase);

// What a policy reports back after consuming one round of feedback. Policies
// without a virtual queue report zero queues.
struct RoundReport {
  Phase phase = Phase::Main;
  Vector queue_before;  // Q_t, the queue the decision was made with
  Vector queue_after;   // Q_{t+1}
  Vector gap;           // pessimistic gap of x_t under the pre-update estimator
};

// Shared interface for SELO and the baselines: every algorithm sees exactly the
// same feedback (loss value + gradient at the played point, and the bandit
// consumption o_t = A_t x_t).
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;
  virtual DecisionVector decide(Rng& rng) = 0;
  virtual RoundReport observe(const DecisionVector& x, const LossFeedback& loss, const Vector& consumption) = 0;
  virtual Phase phase() const = 0;
  bool stopped() const { return phase() == Phase::Stopped; }
};

// Cumulative consumption against the total budget. In hard mode the tracker
// latches `exhausted` on the first round whose consumption pushes any
// coordinate past the total.
class BudgetTracker {
 public:
  explicit BudgetTracker(BudgetSpec budget);

  void record(const Vector& consumption);

  const BudgetSpec& budget() const { return budget_; }
  const Vector& cumulative() const { return cumulative_; }
  bool exhausted() const { return exhausted_; }

 private:
  BudgetSpec budget_;
  Vector cumulative_;
  bool exhausted_ = false;
};

}  // namespace selo
