#include "selo/policy.hpp"

namespace selo {

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::Explore:
      return "explore";
    case Phase::Main:
      return "main";
    case Phase::Stopped:
      return "stopped";
  }
  return "unknown";
}

BudgetTracker::BudgetTracker(BudgetSpec budget)
    : budget_(std::move(budget)), cumulative_(Vector::Zero(budget_.resources())) {}

void BudgetTracker::record(const Vector& consumption) {
  require(consumption.size() == cumulative_.size(), "budget tracker: consumption has wrong dimension");
  cumulative_ += consumption;
  if (budget_.mode == BudgetMode::Hard && (cumulative_.array() > budget_.total.array()).any()) exhausted_ = true;
}

}  // namespace selo
