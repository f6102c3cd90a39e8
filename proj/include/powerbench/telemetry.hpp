#pragma once

// Meter readings and usage counters as the estimators see them.

#include "powerbench/simnode.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace powerbench::telemetry {

/// One socket-level meter reading, RAPL style.
struct PowerSample {
  std::int64_t t = 0;
  int socket_id = 0;
  double pkg = 0.0;
  double dram = 0.0;

  bool operator==(const PowerSample &) const = default;
};

/// Per-tick usage of one container or native process.
struct UsageSample {
  std::int64_t t = 0;
  std::string container_id;
  bool is_container = true;
  bool active = true;
  int core_id = -1;
  double cpu_fraction = 0.0;
  double cycles = 0.0;    // giga-cycles executed this tick
  double bandwidth = 0.0; // GB/s
  double requested_cores = 0.0;

  bool operator==(const UsageSample &) const = default;
};

/// Per-core frequency and C-state residency counters for one tick.
struct CoreSample {
  std::int64_t t = 0;
  int core_id = 0;
  int socket_id = 0;
  double frequency = 0.0;
  simnode::Residency residency{};
};

/// Multiplicative Gaussian meter noise with a private, seeded stream.
class NoiseModel {
public:
  explicit NoiseModel(double relative_sigma = 0.002, std::uint64_t seed = 0);

  double relative_sigma() const { return relative_sigma_; }
  std::uint64_t seed() const { return seed_; }

  /// Returns 1 + eps with eps ~ N(0, relative_sigma^2).
  double draw_factor();

private:
  double relative_sigma_;
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

PowerSample sample_socket(const simnode::PowerBreakdown &breakdown, NoiseModel &noise, std::int64_t t);

/// Non-overlapping means over `interval` consecutive 1 s samples; the partial
/// trailing window is dropped.
std::vector<double> aggregate_window(std::span<const double> series, int interval);

void write_power_csv(std::ostream &os, std::span<const PowerSample> samples);
void write_usage_csv(std::ostream &os, std::span<const UsageSample> samples);

} // namespace powerbench::telemetry
