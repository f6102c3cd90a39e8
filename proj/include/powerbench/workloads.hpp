#pragma once

// Stressor web service, co-runners, batch jobs and monitoring containers,
// reduced to per-tick utilization and memory bandwidth.

#include "powerbench/simnode.hpp"
#include "powerbench/telemetry.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace powerbench::workloads {

enum class WorkloadKind { cpu_bound, memory_bound, mixed };

const char *to_string(WorkloadKind kind);
WorkloadKind workload_kind_from_string(const std::string &s);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::cpu_bound;
  double cycles_per_request = 2.125;  // giga-cycles
  double bandwidth_active = 0.1;      // GB/s while computing
  double overhead_per_request = 1.0;  // s of non-compute latency per request

  void validate() const;
  bool operator==(const WorkloadSpec &) const = default;
};

enum class Qos { guaranteed, burstable };
enum class Lifecycle { active, completed };

struct ContainerDeployment {
  std::string container_id;
  std::string namespace_name = "default";
  int core_id = -1;
  Qos qos = Qos::guaranteed;
  double memory_limit_mb = 2048.0;
  double requested_cores = 1.0;
  Lifecycle lifecycle = Lifecycle::active;

  void validate() const;
  bool operator==(const ContainerDeployment &) const = default;
};

/// Sequential closed loop: the next request is dispatched only after the
/// previous one has completed.
struct RequestSchedule {
  int request_count = 100;

  bool operator==(const RequestSchedule &) const = default;
};

/// Seconds of compute per request at frequency f (GHz).
double service_time(const WorkloadSpec &spec, double f);

/// Busy fraction of a closed loop: t_c / (t_c + overhead).
double closed_loop_utilization(const WorkloadSpec &spec, double f);

struct WorkOverhead {
  double cycles_per_request = 0.0;
  double overhead = 0.0;
};

/// Solves cycles/overhead so the closed loop runs at u_low at f_low, then
/// checks the implied utilization at f_high lands within 0.01 of u_high.
/// `overhead` fixes the otherwise free absolute scale.
WorkOverhead calibrate_work_overhead(double u_low, double u_high, double f_low, double f_high,
                                     double overhead = 1.0);

/// Stressor driver. Runs `request_count` requests back to back; each tick
/// carries the loop's steady busy fraction.
class ClosedLoop {
public:
  ClosedLoop(WorkloadSpec spec, RequestSchedule schedule);

  const WorkloadSpec &spec() const { return spec_; }
  void set_spec(const WorkloadSpec &spec);

  /// Arms a new batch of requests at host frequency f.
  void start(double f);
  bool running() const { return ticks_left_ > 0; }
  int requests_completed() const { return completed_; }
  /// Number of 1 s ticks the batch occupies at frequency f.
  std::int64_t batch_ticks(double f) const;

  struct TickWork {
    double cpu_fraction = 0.0;
    double cycles = 0.0;
    double bandwidth = 0.0;
  };
  TickWork advance(double f);

private:
  WorkloadSpec spec_;
  RequestSchedule schedule_;
  std::int64_t ticks_left_ = 0;
  std::int64_t ticks_total_ = 0;
  int completed_ = 0;
  double cycles_done_ = 0.0;
};

/// Steady load: a co-runner, a batch job or a monitoring container.
struct SteadyLoad {
  double utilization = 1.0;
  double bandwidth_active = 0.0;
  /// When set, the load completes after this many ticks.
  std::optional<std::int64_t> run_ticks;
  std::int64_t ticks_run = 0;
};

struct Instance {
  std::string id;
  bool is_container = true;
  int core_id = -1;
  double requested_cores = 0.0;
  Qos qos = Qos::burstable;
  std::string namespace_name = "default";
  double memory_limit_mb = 0.0;
  Lifecycle lifecycle = Lifecycle::active;
  std::variant<ClosedLoop, SteadyLoad> driver;
};

class WorkloadSet {
public:
  void deploy(const ContainerDeployment &d, std::variant<ClosedLoop, SteadyLoad> driver);
  /// Native process pinned with taskset, outside any container.
  void launch_native(const std::string &id, int core_id, SteadyLoad load, double memory_limit_mb);

  Instance &get(const std::string &id);
  const Instance &get(const std::string &id) const;
  std::span<Instance> instances() { return instances_; }
  std::span<const Instance> instances() const { return instances_; }
  std::vector<ContainerDeployment> deployments() const;
  /// Cores with no active tenant, ascending.
  std::vector<int> free_cores(const simnode::NodeState &node, int socket_id) const;

  /// Throws ConfigurationError when a guaranteed container shares its core or
  /// points at a core that does not exist.
  void validate_placement(const simnode::NodeState &node) const;

private:
  std::vector<Instance> instances_;
};

/// Advances every driver by one tick and reports usage. Completed containers
/// report zero usage.
std::vector<telemetry::UsageSample> step_workloads(const simnode::NodeState &node, WorkloadSet &set,
                                                   std::int64_t tick);

/// Pins this tick's usage onto the cores and refreshes residency.
void apply_usage(simnode::NodeState &node, std::span<const telemetry::UsageSample> usage);

} // namespace powerbench::workloads
