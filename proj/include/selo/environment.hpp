#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "selo/core.hpp"
#include "selo/policy.hpp"

namespace selo {

// A fully realized online problem: losses f_t and consumption matrices A_t for
// rounds t = 1..horizon, plus the mean matrix A the offline benchmark uses.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int dimension() const = 0;
  virtual int resources() const = 0;
  virtual int horizon() const = 0;

  virtual LossFeedback loss(int t, const Vector& x) const = 0;
  virtual const Matrix& consumption_matrix(int t) const = 0;
  virtual const Matrix& mean_consumption() const = 0;

  Vector observe_consumption(int t, const Vector& x) const { return consumption_matrix(t) * x; }

  // (sum_t f_t(x), sum_t grad f_t(x)) over every round.
  virtual std::pair<double, Vector> total_loss(const Vector& x) const;
};

// ---------------------------------------------------------------------------
// Price traces: CSV `timestamp,region,price`, ISO-8601 hourly timestamps.

struct PriceRow {
  std::string timestamp;
  std::int64_t hour = 0;  // hours since 1970-01-01T00:00Z
  int region = 0;
  double price = 0.0;
};

struct PriceTrace {
  std::vector<PriceRow> rows;
  int regions = 0;
  int hours = 0;
  std::int64_t first_hour = 0;
  // normalized = (price - offset) * scale; scale = 0 for a constant trace.
  double offset = 0.0;
  double scale = 0.0;
  Matrix normalized;  // hours x regions

  double normalize(double price) const { return (price - offset) * scale; }
};

// Parses "YYYY-MM-DDTHH[:MM[:SS]][Z]"; minutes and seconds must be zero.
std::int64_t parse_iso_hour(const std::string& timestamp);

/// Loads and validates a trace. `regions` = 0 infers the region count from
/// the largest region id. Throws ParseError (with line and column) or
/// GapError (naming the missing hour/region cell).
PriceTrace load_price_trace(const std::string& path, int regions = 0);
PriceTrace parse_price_trace(const std::string& csv_text, int regions = 0);

// ---------------------------------------------------------------------------
// Distributed data-center model: region i serves as an M/M/1 queue with
// service rate e_i + x_i mu_{t,i} against arrivals lambda_{t,i}; the decision
// x_i is the fraction of extra capacity switched on and A_t holds energy prices.

struct DataCenterConfig {
  int regions = 10;
  Vector base_capacity;        // e, jobs/hour
  double service_mean = 5.0;   // mu_t ~ N(mean, std) truncated to [min, max]
  double service_std = 0.5;
  double service_min = 3.0;
  double service_max = 7.0;
  Matrix traffic_profile;      // 24 x regions, mean arrivals per hour of day
  double traffic_noise_std = 0.05;
  Matrix price_profile;        // 24 x regions, mean normalized price
  double price_noise_std = 0.05;
  std::optional<std::string> price_trace_path;  // set: TraceFile source
  double domain_floor = 0.05;  // delta_min
  double decision_floor = 0.0;  // smallest feasible x_i, used by the stability clamp

  static DataCenterConfig defaults(int regions = 10);
  void validate() const;

  // Largest admissible arrival rate of region i: e_i + service_min * decision_floor - delta_min.
  double arrival_cap(int region) const;
};

Matrix default_traffic_profile(int regions);
Matrix default_price_profile(int regions);

struct RoundDraw {
  Vector arrivals;   // lambda_t
  Vector service;    // mu_t
  Matrix prices;     // A_t, 1 x regions
};

class DataCenterEnv;

class DataCenterRealization : public Environment {
 public:
  int dimension() const override { return static_cast<int>(arrivals_.cols()); }
  int resources() const override { return 1; }
  int horizon() const override { return static_cast<int>(arrivals_.rows()); }

  LossFeedback loss(int t, const Vector& x) const override;
  const Matrix& consumption_matrix(int t) const override;
  const Matrix& mean_consumption() const override { return mean_prices_; }
  std::pair<double, Vector> total_loss(const Vector& x) const override;

  const Matrix& arrivals() const { return arrivals_; }  // horizon x regions
  const Matrix& service() const { return service_; }
  const DataCenterConfig& config() const { return config_; }

 private:
  friend class DataCenterEnv;
  DataCenterConfig config_;
  Matrix arrivals_;
  Matrix service_;
  std::vector<Matrix> prices_;
  Matrix mean_prices_;
};

class DataCenterEnv {
 public:
  explicit DataCenterEnv(DataCenterConfig config);

  const DataCenterConfig& config() const { return config_; }
  const std::optional<PriceTrace>& trace() const { return trace_; }

  static int hour_of_day(int t) { return (t - 1) % 24; }

  /// Arrival rates lambda_t (clamped to [0, arrival_cap]) and service rates mu_t.
  std::pair<Vector, Vector> generate_traffic(int t, Rng& rng) const;
  /// A_t: synthetic profile plus clamped noise, or the normalized trace row.
  Matrix sample_consumption(int t, Rng& rng) const;

  /// Declared mean of A_t. Synthetic: exact mean of the clamped Gaussian
  /// averaged over the day. Trace: mean over the first `horizon` hours.
  Matrix mean_consumption(int horizon) const;

  /// Draws rounds 1..horizon from a seed. Rounds are drawn in order with a
  /// single stream, so a shorter horizon is a prefix of a longer one.
  DataCenterRealization realize(int horizon, std::uint64_t seed) const;

 private:
  DataCenterConfig config_;
  std::optional<PriceTrace> trace_;
};

// ---------------------------------------------------------------------------
// Small synthetic problem for tests and smoke runs: f_t(x) = |x - theta_t|^2 / 2
// with theta_t = target + N(0, target_noise_std^2) and A_t = consumption plus
// i.i.d. N(0, consumption_noise_std^2) entries.

struct SyntheticConfig {
  int dimension = 2;
  int resources = 1;
  Vector target;
  double target_noise_std = 0.1;
  Matrix consumption;  // resources x dimension, the mean of A_t
  double consumption_noise_std = 0.05;

  static SyntheticConfig defaults(int dimension = 2, int resources = 1);
  void validate() const;
};

class SyntheticRealization : public Environment {
 public:
  SyntheticRealization(const SyntheticConfig& config, int horizon, std::uint64_t seed);

  int dimension() const override { return static_cast<int>(targets_.cols()); }
  int resources() const override { return static_cast<int>(mean_.rows()); }
  int horizon() const override { return static_cast<int>(targets_.rows()); }

  LossFeedback loss(int t, const Vector& x) const override;
  const Matrix& consumption_matrix(int t) const override;
  const Matrix& mean_consumption() const override { return mean_; }

 private:
  Matrix targets_;  // horizon x dimension
  std::vector<Matrix> matrices_;
  Matrix mean_;
};

/// Delay loss sum_i 1/u_i with u_i = e_i + x_i mu_i - lambda_i, extended
/// linearly (C^1) below u = domain_floor.
LossFeedback delay_loss(const Vector& base_capacity, const Vector& arrivals, const Vector& service,
                        double domain_floor, const Vector& x);

}  // namespace selo
