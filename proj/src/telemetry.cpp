#include "powerbench/telemetry.hpp"

#include "powerbench/errors.hpp"
#include "powerbench/numfmt.hpp"

#include <algorithm>
#include <ostream>

namespace powerbench::telemetry {

NoiseModel::NoiseModel(double relative_sigma, std::uint64_t seed)
    : relative_sigma_(relative_sigma), seed_(seed), engine_(seed) {
  if (!(relative_sigma >= 0.0))
    throw InputDomainError("noise: relative_sigma must be >= 0");
}

double NoiseModel::draw_factor() {
  // Draw even when sigma is 0 so the stream position does not depend on it.
  const double z = normal_(engine_);
  return 1.0 + relative_sigma_ * z;
}

PowerSample sample_socket(const simnode::PowerBreakdown &breakdown, NoiseModel &noise, std::int64_t t) {
  PowerSample s;
  s.t = t;
  s.socket_id = breakdown.socket_id;
  const double fp = noise.draw_factor();
  const double fd = noise.draw_factor();
  s.pkg = noise.relative_sigma() == 0.0 ? breakdown.pkg : std::max(0.0, breakdown.pkg * fp);
  s.dram = noise.relative_sigma() == 0.0 ? breakdown.dram : std::max(0.0, breakdown.dram * fd);
  return s;
}

std::vector<double> aggregate_window(std::span<const double> series, int interval) {
  if (series.empty())
    throw EmptyInputError("aggregate_window: empty series");
  if (interval < 1)
    throw InputDomainError("aggregate_window: interval must be at least 1 s");
  const std::size_t width = static_cast<std::size_t>(interval);
  std::vector<double> out;
  for (std::size_t start = 0; start + width <= series.size(); start += width) {
    double acc = 0.0;
    for (std::size_t i = start; i < start + width; ++i)
      acc += series[i];
    out.push_back(acc / static_cast<double>(width));
  }
  return out;
}

void write_power_csv(std::ostream &os, std::span<const PowerSample> samples) {
  os << "t,socket,pkg_w,dram_w\n";
  for (const auto &s : samples)
    os << s.t << ',' << s.socket_id << ',' << numfmt::str(s.pkg) << ',' << numfmt::str(s.dram) << '\n';
}

void write_usage_csv(std::ostream &os, std::span<const UsageSample> samples) {
  os << "t,container,cpu_fraction,cycles,bandwidth_gbs\n";
  for (const auto &s : samples)
    os << s.t << ',' << s.container_id << ',' << numfmt::str(s.cpu_fraction) << ',' << numfmt::str(s.cycles)
       << ',' << numfmt::str(s.bandwidth) << '\n';
}

} // namespace powerbench::telemetry
