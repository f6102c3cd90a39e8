#pragma once

// Container-level power estimators: the ratio model under test and a
// resource-centric alternative.

#include "powerbench/simnode.hpp"
#include "powerbench/telemetry.hpp"
#include "powerbench/workloads.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace powerbench::attribution {

/// Entry that collects every process without a container identity.
inline constexpr const char *kSystemProcesses = "system_processes";

enum class Mode { kepler_ratio, resource_centric };
enum class Domain { pkg, dram };

const char *to_string(Mode mode);
Mode mode_from_string(const std::string &s);

struct EstimatorConfig {
  Mode mode = Mode::kepler_ratio;
  /// Explicit idle constants; when <= 0 they are measured at estimator start.
  double fixed_idle_pkg = 0.0;
  double fixed_idle_dram = 0.0;
  double idle_underestimate_beta_pkg = 0.6;
  double idle_underestimate_beta_dram = 0.2;
  int window = 30; // s

  void validate() const;
  bool operator==(const EstimatorConfig &) const = default;
};

struct EntryAttribution {
  std::string id;
  bool is_container = true;
  double idle_pkg = 0.0;
  double dyn_pkg = 0.0;
  double idle_dram = 0.0;
  double dyn_dram = 0.0;

  bool operator==(const EntryAttribution &) const = default;
};

struct AttributionResult {
  std::vector<EntryAttribution> entries;
  double node_idle_pkg = 0.0;
  double node_idle_dram = 0.0;
  double node_dyn_pkg = 0.0;
  double node_dyn_dram = 0.0;

  const EntryAttribution &at(const std::string &id) const;
};

struct PowerSplit {
  double idle = 0.0;
  double dynamic = 0.0;
};

PowerSplit split_node_power(double total, double fixed_idle);

/// Reserved-core (GHG-style) idle split. Completed containers get nothing.
std::vector<double> allocate_idle(std::span<const workloads::ContainerDeployment> deployments, double node_idle,
                                  double total_cores);

/// Ratio model: every entry gets node_dyn * cpu_fraction / sum(cpu_fraction),
/// for both domains.
std::vector<double> allocate_dynamic_ratio(std::span<const telemetry::UsageSample> usages, double node_dyn,
                                           Domain domain);

struct DomainShares {
  std::vector<double> pkg;
  std::vector<double> dram;
};

/// PKG weighted by V(f)^2 * f * u of each entry's core, DRAM by bandwidth.
DomainShares allocate_dynamic_resource_centric(std::span<const telemetry::UsageSample> usages,
                                               double node_dyn_pkg, double node_dyn_dram,
                                               std::span<const telemetry::CoreSample> cores,
                                               const simnode::DvfsModel &dvfs);

/// Static power implied by per-core residency: the idle estimate the
/// resource-centric mode recomputes every window.
struct StaticEstimate {
  double pkg = 0.0;
  double dram = 0.0;
};

StaticEstimate static_estimate(std::span<const simnode::SocketSpec> sockets,
                               std::span<const telemetry::CoreSample> cores);

/// Window means of node meter totals, usage and core counters.
struct WindowInput {
  std::int64_t t_start = 0;
  double node_pkg = 0.0;
  double node_dram = 0.0;
  std::vector<telemetry::UsageSample> usage;
  std::vector<telemetry::CoreSample> cores;
};

/// Collects per-tick telemetry into fixed windows.
class WindowAccumulator {
public:
  explicit WindowAccumulator(int window);

  /// Returns a completed window once `window` ticks have been added.
  std::optional<WindowInput> add(std::span<const telemetry::PowerSample> power,
                                 std::span<const telemetry::UsageSample> usage,
                                 std::span<const telemetry::CoreSample> cores);
  void reset();

private:
  int window_;
  int count_ = 0;
  WindowInput acc_;
};

class Estimator {
public:
  Estimator(EstimatorConfig config, std::vector<simnode::SocketSpec> platform);

  const EstimatorConfig &config() const { return config_; }
  /// Captures the fixed idle constants from the first window (C-states off).
  void initialize(const WindowInput &start);
  bool initialized() const { return initialized_; }
  double fixed_idle_pkg() const { return fixed_idle_pkg_; }
  double fixed_idle_dram() const { return fixed_idle_dram_; }

  AttributionResult estimate(const WindowInput &window) const;

private:
  EstimatorConfig config_;
  std::vector<simnode::SocketSpec> platform_;
  double total_cores_ = 0.0;
  double fixed_idle_pkg_ = 0.0;
  double fixed_idle_dram_ = 0.0;
  bool initialized_ = false;
};

} // namespace powerbench::attribution
