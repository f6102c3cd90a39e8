#pragma once

// Scenario configuration: testbed, workloads, estimator and protocol timing.
// Persisted as JSON with a schema_version.

#include "powerbench/attribution.hpp"
#include "powerbench/simnode.hpp"
#include "powerbench/workloads.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace powerbench::valframe {

inline constexpr int kScenarioSchemaVersion = 1;

/// Testbed isolation settings. Only the C-state flag may be changed, and
/// only by a test step.
struct Isolation {
  bool turbo = false;
  bool hyperthreading = false;
  bool cstates = false;
  std::string governor = "userspace";
  bool uncore_fixed = true;
  bool swap = false;

  bool operator==(const Isolation &) const = default;
};

struct CoRunnerPlan {
  double utilization = 1.0;
  double bandwidth_active = 0.0005; // GB/s
  double memory_limit_mb = 1000.0;
  std::vector<int> counts{0, 2, 4, 6, 8, 10, 12};

  bool operator==(const CoRunnerPlan &) const = default;
};

struct MonitoringPlan {
  std::vector<std::string> containers{"kepler", "prometheus", "grafana"};
  std::string namespace_name = "monitoring";
  int core = 13;
  double usage_min = 0.02;
  double usage_max = 0.05;
  double bandwidth_active = 0.05; // GB/s while busy
  double requested_cores = 1.0;

  bool operator==(const MonitoringPlan &) const = default;
};

/// Non-experimental system processes kept on the other socket.
struct BackgroundPlan {
  int socket = 1;
  double utilization_per_core = 0.5;
  double bandwidth_active = 0.05;

  bool operator==(const BackgroundPlan &) const = default;
};

struct InactivePlan {
  int batch_jobs = 12;
  int run_s = 120;
  int observe_s = 120;
  std::string namespace_name = "idle_ns";

  bool operator==(const InactivePlan &) const = default;
};

struct Timing {
  int settle_s = 30;
  int baseline_s = 120;
  int request_count = 100;

  bool operator==(const Timing &) const = default;
};

struct NoiseParams {
  double relative_sigma = 0.002;
  std::uint64_t seed = 42;

  bool operator==(const NoiseParams &) const = default;
};

/// Member defaults are the constants produced by calibrating
/// scenarios/targets.json.
struct ScenarioConfig {
  std::string name = "default";
  simnode::SocketSpec socket{.static_per_core_c0 = 4.5};
  int socket_count = 2;
  int measured_socket = 0;
  Isolation isolation;
  int host_core = 0;
  double stressor_memory_limit_mb = 2048.0;
  workloads::WorkloadSpec stressor_cpu;
  workloads::WorkloadSpec stressor_memory{.kind = workloads::WorkloadKind::memory_bound,
                                          .cycles_per_request = 2.125,
                                          .bandwidth_active = 10.0,
                                          .overhead_per_request = 1.0};
  CoRunnerPlan co_runners;
  MonitoringPlan monitoring;
  BackgroundPlan background;
  InactivePlan inactive;
  Timing timing;
  attribution::EstimatorConfig estimator{.idle_underestimate_beta_pkg = 0.48, .idle_underestimate_beta_dram = 0.22};
  NoiseParams noise;
  double margin = 0.05;
  /// Constants and achieved bands written by `calibrate`; carried verbatim.
  nlohmann::json calibration = nlohmann::json::object();

  /// Throws ConfigurationError on any inconsistency.
  void validate() const;

  bool operator==(const ScenarioConfig &) const = default;
};

nlohmann::json to_json(const ScenarioConfig &cfg);
ScenarioConfig scenario_from_json(const nlohmann::json &j);

ScenarioConfig load_scenario(const std::filesystem::path &path);
void save_scenario(const ScenarioConfig &cfg, const std::filesystem::path &path);

/// FNV-1a over the canonical JSON dump.
std::string scenario_hash(const ScenarioConfig &cfg);

} // namespace powerbench::valframe
