#include "selo/environment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace selo {

namespace {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// E[clamp(Y, 0, 1)] for Y ~ N(mean, sd^2).
double clamped_gaussian_mean(double mean, double sd) {
  if (sd <= 0.0) return std::clamp(mean, 0.0, 1.0);
  const double a = (0.0 - mean) / sd;
  const double b = (1.0 - mean) / sd;
  const double inside = mean * (normal_cdf(b) - normal_cdf(a)) + sd * (normal_pdf(a) - normal_pdf(b));
  return inside + (1.0 - normal_cdf(b));
}

// Circular distance between hours of the day.
double hour_distance(double h, double center) {
  const double d = std::fmod(std::abs(h - center), 24.0);
  return std::min(d, 24.0 - d);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(trim(field));
  return fields;
}

std::string format_hour(std::int64_t hour) {
  using namespace std::chrono;
  const sys_days day{days{static_cast<int>(hour >= 0 ? hour / 24 : (hour - 23) / 24)}};
  const year_month_day ymd{day};
  const int hh = static_cast<int>(hour - static_cast<std::int64_t>(day.time_since_epoch().count()) * 24);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:00:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hh);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

std::int64_t parse_iso_hour(const std::string& timestamp) {
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  char sep = 0;
  int consumed = 0;
  const std::string ts = trim(timestamp);
  if (std::sscanf(ts.c_str(), "%4d-%2d-%2d%c%2d%n", &year, &month, &day, &sep, &hour, &consumed) != 5 ||
      (sep != 'T' && sep != ' ')) {
    throw ParseError("bad ISO-8601 timestamp '" + timestamp + "'");
  }
  std::string rest = ts.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest[0] == ':') {
    int used = 0;
    if (std::sscanf(rest.c_str(), ":%2d%n", &minute, &used) != 1) throw ParseError("bad minutes in '" + timestamp + "'");
    rest = rest.substr(static_cast<std::size_t>(used));
    if (!rest.empty() && rest[0] == ':') {
      if (std::sscanf(rest.c_str(), ":%2d%n", &second, &used) != 1) {
        throw ParseError("bad seconds in '" + timestamp + "'");
      }
      rest = rest.substr(static_cast<std::size_t>(used));
    }
  }
  if (rest == "Z" || rest == "+00:00") rest.clear();
  if (!rest.empty()) throw ParseError("unsupported timestamp suffix in '" + timestamp + "'");
  if (minute != 0 || second != 0) throw ParseError("timestamp '" + timestamp + "' is not on an hour boundary");

  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour < 0 || hour > 23) throw ParseError("invalid calendar time '" + timestamp + "'");
  return static_cast<std::int64_t>(sys_days{ymd}.time_since_epoch().count()) * 24 + hour;
}

PriceTrace parse_price_trace(const std::string& csv_text, int regions) {
  std::istringstream in(csv_text);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError("line 1: empty price trace");
  ++line_no;
  if (!line.empty() && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"timestamp", "region", "price"}) {
    throw ParseError("line 1: expected header 'timestamp,region,price'");
  }

  PriceTrace trace;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = "line " + std::to_string(line_no);
    if (fields.size() != 3) throw ParseError(where + ": expected 3 columns, found " + std::to_string(fields.size()));
    PriceRow row;
    row.timestamp = fields[0];
    try {
      row.hour = parse_iso_hour(fields[0]);
    } catch (const ParseError& e) {
      throw ParseError(where + ", column 1 (timestamp): " + e.what());
    }
    std::size_t used = 0;
    try {
      row.region = std::stoi(fields[1], &used);
      if (used != fields[1].size() || row.region < 0) throw std::invalid_argument("region");
    } catch (const std::exception&) {
      throw ParseError(where + ", column 2 (region): bad region id '" + fields[1] + "'");
    }
    try {
      row.price = std::stod(fields[2], &used);
      if (used != fields[2].size() || !std::isfinite(row.price)) throw std::invalid_argument("price");
    } catch (const std::exception&) {
      throw ParseError(where + ", column 3 (price): bad price '" + fields[2] + "'");
    }
    trace.rows.push_back(row);
  }
  if (trace.rows.empty()) throw ParseError("price trace has no data rows");

  int max_region = 0;
  std::int64_t first = trace.rows.front().hour;
  std::int64_t last = first;
  double lo = trace.rows.front().price;
  double hi = lo;
  for (const auto& row : trace.rows) {
    max_region = std::max(max_region, row.region);
    first = std::min(first, row.hour);
    last = std::max(last, row.hour);
    lo = std::min(lo, row.price);
    hi = std::max(hi, row.price);
  }
  trace.regions = regions > 0 ? regions : max_region + 1;
  if (max_region >= trace.regions) {
    throw ParseError("region id " + std::to_string(max_region) + " outside [0, " + std::to_string(trace.regions) + ")");
  }
  trace.first_hour = first;
  trace.hours = static_cast<int>(last - first + 1);
  trace.offset = lo;
  trace.scale = hi > lo ? 1.0 / (hi - lo) : 0.0;

  trace.normalized = Matrix::Constant(trace.hours, trace.regions, std::numeric_limits<double>::quiet_NaN());
  for (const auto& row : trace.rows) {
    double& cell = trace.normalized(static_cast<Eigen::Index>(row.hour - first), row.region);
    if (!std::isnan(cell)) {
      throw ParseError("duplicate cell for " + row.timestamp + " region " + std::to_string(row.region));
    }
    cell = trace.normalize(row.price);
  }
  for (int h = 0; h < trace.hours; ++h) {
    for (int r = 0; r < trace.regions; ++r) {
      if (std::isnan(trace.normalized(h, r))) {
        throw GapError("missing price for hour " + format_hour(first + h) + " region " + std::to_string(r));
      }
    }
  }
  return trace;
}

PriceTrace load_price_trace(const std::string& path, int regions) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open price trace '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_price_trace(buffer.str(), regions);
}

// ---------------------------------------------------------------------------

Matrix default_traffic_profile(int regions) {
  // Single daily swing between 0.3 (04:00) and 0.8 (16:00) of the unit base
  // capacity, staggered by up to three hours across regions.
  Matrix profile(24, regions);
  for (int h = 0; h < 24; ++h) {
    for (int i = 0; i < regions; ++i) {
      const double shifted = static_cast<double>(h - i % 4);
      const double shape = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (shifted - 4.0) / 24.0));
      profile(h, i) = 0.3 + 0.5 * shape;
    }
  }
  return profile;
}

Matrix default_price_profile(int regions) {
  // Morning (08:00) and evening (19:00) peaks on top of a region-dependent base.
  Matrix profile(24, regions);
  for (int h = 0; h < 24; ++h) {
    for (int i = 0; i < regions; ++i) {
      const double base = 0.25 + 0.2 * (regions > 1 ? static_cast<double>(i) / (regions - 1) : 0.0);
      const double morning = std::exp(-0.5 * std::pow(hour_distance(h, 8.0) / 2.0, 2));
      const double evening = std::exp(-0.5 * std::pow(hour_distance(h, 19.0) / 2.5, 2));
      profile(h, i) = base + 0.25 * (morning + evening);
    }
  }
  return profile;
}

DataCenterConfig DataCenterConfig::defaults(int regions) {
  DataCenterConfig c;
  c.regions = regions;
  c.base_capacity = Vector::Ones(regions);
  c.traffic_profile = default_traffic_profile(regions);
  c.price_profile = default_price_profile(regions);
  return c;
}

double DataCenterConfig::arrival_cap(int region) const {
  return base_capacity(region) + service_min * decision_floor - domain_floor;
}

void DataCenterConfig::validate() const {
  require(regions >= 1, "data center: regions must be positive");
  require(base_capacity.size() == regions && (base_capacity.array() > 0.0).all(),
          "data center: base_capacity must be positive with one entry per region");
  require(service_mean > 0.0 && service_std >= 0.0, "data center: bad service distribution");
  require(0.0 < service_min && service_min <= service_mean && service_mean <= service_max,
          "data center: service truncation must bracket the mean and stay positive");
  require(traffic_profile.rows() == 24 && traffic_profile.cols() == regions, "data center: traffic profile must be 24 x regions");
  require(price_profile.rows() == 24 && price_profile.cols() == regions, "data center: price profile must be 24 x regions");
  require((price_profile.array() >= 0.0).all() && (price_profile.array() <= 1.0).all(),
          "data center: price profile must lie in [0, 1]");
  require(traffic_noise_std >= 0.0 && price_noise_std >= 0.0, "data center: noise levels must be nonnegative");
  require(domain_floor > 0.0, "data center: domain_floor must be positive");
  require(decision_floor >= 0.0, "data center: decision_floor must be nonnegative");
  for (int i = 0; i < regions; ++i) {
    require(arrival_cap(i) >= 0.0, "data center: base capacity below the domain floor in region " + std::to_string(i));
  }
}

DataCenterEnv::DataCenterEnv(DataCenterConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.price_trace_path) trace_ = load_price_trace(*config_.price_trace_path, config_.regions);
  if (trace_ && trace_->regions != config_.regions) {
    throw ConfigInvalid("price trace has " + std::to_string(trace_->regions) + " regions, config expects " +
                        std::to_string(config_.regions));
  }
}

std::pair<Vector, Vector> DataCenterEnv::generate_traffic(int t, Rng& rng) const {
  const int h = hour_of_day(t);
  const int r = config_.regions;
  std::normal_distribution<double> traffic_noise(0.0, 1.0);
  std::normal_distribution<double> service(config_.service_mean, config_.service_std);
  Vector arrivals(r);
  Vector rates(r);
  for (int i = 0; i < r; ++i) {
    const double draw = config_.traffic_profile(h, i) + config_.traffic_noise_std * traffic_noise(rng);
    arrivals(i) = std::clamp(draw, 0.0, config_.arrival_cap(i));
  }
  for (int i = 0; i < r; ++i) {
    double mu = service(rng);
    while (mu < config_.service_min || mu > config_.service_max) mu = service(rng);
    rates(i) = mu;
  }
  return {arrivals, rates};
}

Matrix DataCenterEnv::sample_consumption(int t, Rng& rng) const {
  const int r = config_.regions;
  Matrix a(1, r);
  if (trace_) {
    if (t > trace_->hours) {
      throw TraceExhausted("price trace has " + std::to_string(trace_->hours) + " hours, round " + std::to_string(t) +
                           " requested");
    }
    a = trace_->normalized.row(t - 1);
    return a;
  }
  const int h = hour_of_day(t);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < r; ++i) {
    a(0, i) = std::clamp(config_.price_profile(h, i) + config_.price_noise_std * noise(rng), 0.0, 1.0);
  }
  return a;
}

Matrix DataCenterEnv::mean_consumption(int horizon) const {
  const int r = config_.regions;
  Matrix mean = Matrix::Zero(1, r);
  if (trace_) {
    if (horizon > trace_->hours) {
      throw TraceExhausted("price trace has " + std::to_string(trace_->hours) + " hours, horizon " +
                           std::to_string(horizon) + " requested");
    }
    mean = trace_->normalized.topRows(horizon).colwise().mean();
    return mean;
  }
  for (int h = 0; h < 24; ++h) {
    for (int i = 0; i < r; ++i) mean(0, i) += clamped_gaussian_mean(config_.price_profile(h, i), config_.price_noise_std);
  }
  return mean / 24.0;
}

DataCenterRealization DataCenterEnv::realize(int horizon, std::uint64_t seed) const {
  require(horizon >= 1, "realize: horizon must be positive");
  DataCenterRealization out;
  out.config_ = config_;
  out.arrivals_.resize(horizon, config_.regions);
  out.service_.resize(horizon, config_.regions);
  out.prices_.reserve(static_cast<std::size_t>(horizon));
  Rng rng(seed);
  for (int t = 1; t <= horizon; ++t) {
    auto [arrivals, service] = generate_traffic(t, rng);
    out.arrivals_.row(t - 1) = arrivals.transpose();
    out.service_.row(t - 1) = service.transpose();
    out.prices_.push_back(sample_consumption(t, rng));
  }
  out.mean_prices_ = mean_consumption(horizon);
  return out;
}

LossFeedback DataCenterRealization::loss(int t, const Vector& x) const {
  require(t >= 1 && t <= horizon(), "data center: round out of range");
  return delay_loss(config_.base_capacity, arrivals_.row(t - 1).transpose(), service_.row(t - 1).transpose(),
                    config_.domain_floor, x);
}

const Matrix& DataCenterRealization::consumption_matrix(int t) const {
  require(t >= 1 && t <= horizon(), "data center: round out of range");
  return prices_[static_cast<std::size_t>(t - 1)];
}

std::pair<double, Vector> Environment::total_loss(const Vector& x) const {
  double value = 0.0;
  Vector grad = Vector::Zero(x.size());
  for (int t = 1; t <= horizon(); ++t) {
    const LossFeedback f = loss(t, x);
    value += f.value;
    grad += f.gradient;
  }
  return {value, grad};
}

std::pair<double, Vector> DataCenterRealization::total_loss(const Vector& x) const {
  require(x.size() == dimension(), "data center: dimension mismatch");
  const double floor = config_.domain_floor;
  const double tangent_slope = 1.0 / (floor * floor);
  double value = 0.0;
  Vector grad = Vector::Zero(x.size());
  // Column-major storage: one contiguous sweep over the rounds per region.
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double e = config_.base_capacity(i);
    const double* lambda = arrivals_.col(i).data();
    const double* mu = service_.col(i).data();
    double v = 0.0, g = 0.0;
    for (Eigen::Index t = 0; t < arrivals_.rows(); ++t) {
      const double u = e + x(i) * mu[t] - lambda[t];
      if (u >= floor) {
        const double inv = 1.0 / u;
        v += inv;
        g -= mu[t] * inv * inv;
      } else {
        v += 1.0 / floor - (u - floor) * tangent_slope;
        g -= mu[t] * tangent_slope;
      }
    }
    value += v;
    grad(i) = g;
  }
  return {value, grad};
}

LossFeedback delay_loss(const Vector& base_capacity, const Vector& arrivals, const Vector& service,
                        double domain_floor, const Vector& x) {
  const Eigen::Index r = x.size();
  require(base_capacity.size() == r && arrivals.size() == r && service.size() == r, "delay_loss: dimension mismatch");
  LossFeedback out;
  out.gradient.resize(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const double u = base_capacity(i) + x(i) * service(i) - arrivals(i);
    if (u >= domain_floor) {
      out.value += 1.0 / u;
      out.gradient(i) = -service(i) / (u * u);
    } else {
      // Tangent line at u = domain_floor.
      const double slope = 1.0 / (domain_floor * domain_floor);
      out.value += 1.0 / domain_floor - (u - domain_floor) * slope;
      out.gradient(i) = -service(i) * slope;
    }
  }
  return out;
}

SyntheticConfig SyntheticConfig::defaults(int dimension, int resources) {
  SyntheticConfig c;
  c.dimension = dimension;
  c.resources = resources;
  c.target = Vector::Constant(dimension, 0.8);
  c.consumption = Matrix::Constant(resources, dimension, 1.0 / dimension);
  return c;
}

void SyntheticConfig::validate() const {
  if (dimension < 1 || resources < 1) throw ConfigInvalid("synthetic: dimension and resources must be positive");
  if (target.size() != dimension) throw ConfigInvalid("synthetic: target must have `dimension` entries");
  if (consumption.rows() != resources || consumption.cols() != dimension) {
    throw ConfigInvalid("synthetic: consumption must be resources x dimension");
  }
  if (!(target_noise_std >= 0.0) || !(consumption_noise_std >= 0.0)) {
    throw ConfigInvalid("synthetic: noise levels must be nonnegative");
  }
}

SyntheticRealization::SyntheticRealization(const SyntheticConfig& config, int horizon, std::uint64_t seed) {
  config.validate();
  require(horizon >= 1, "realize: horizon must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  targets_.resize(horizon, config.dimension);
  matrices_.reserve(static_cast<std::size_t>(horizon));
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < config.dimension; ++i) {
      targets_(t, i) = config.target(i) + config.target_noise_std * normal(rng);
    }
    Matrix a = config.consumption;
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] += config.consumption_noise_std * normal(rng);
    matrices_.push_back(std::move(a));
  }
  mean_ = config.consumption;
}

LossFeedback SyntheticRealization::loss(int t, const Vector& x) const {
  require(t >= 1 && t <= horizon(), "synthetic: round out of range");
  const Vector diff = x - targets_.row(t - 1).transpose();
  return {0.5 * diff.squaredNorm(), diff};
}

const Matrix& SyntheticRealization::consumption_matrix(int t) const {
  require(t >= 1 && t <= horizon(), "synthetic: round out of range");
  return matrices_[static_cast<std::size_t>(t - 1)];
}

}  // namespace selo
