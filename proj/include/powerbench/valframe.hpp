#pragma once

// Accuracy-validation protocol: isolation, baselines, Tests 1-3, the
// completed-pod idle check, cleaning, comparison and stability statistics.

#include "powerbench/attribution.hpp"
#include "powerbench/scenario.hpp"
#include "powerbench/simnode.hpp"
#include "powerbench/telemetry.hpp"
#include "powerbench/workloads.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace powerbench::valframe {

inline constexpr int kReportVersion = 1;

/// Test identifiers in their declared run order.
inline constexpr const char *kTestIds[] = {"t1", "t2-pkg", "t2-dram", "t3", "inactive"};

inline constexpr const char *kStressorId = "stressor";

/// Window series shorter than this are averaged without trimming.
inline constexpr std::size_t kMinTrimmedWindowSeries = 20;

struct BaselineStats {
  int duration = 0; // s
  double mean_pkg = 0.0;
  double mean_dram = 0.0;
  double sigma_pkg = 0.0;
  double sigma_dram = 0.0;

  bool operator==(const BaselineStats &) const = default;
};

struct StabilityStats {
  bool defined = false; // false when the series mean is not positive
  double mu = 0.0;
  double sigma = 0.0;
  double cv_percent = 0.0;

  bool operator==(const StabilityStats &) const = default;
};

StabilityStats stability(std::span<const double> series);

struct ComparisonVerdict {
  bool defined = false; // false when there is no positive reference
  double estimated = 0.0;
  double reference = 0.0;
  double deviation_fraction = 0.0;
  bool pass = false;

  bool operator==(const ComparisonVerdict &) const = default;
};

/// pass iff |estimated - reference| / reference <= margin.
ComparisonVerdict compare(double estimated, double reference, double margin);

/// One load-phase meter sample of the measured socket plus the truth.
struct SamplePoint {
  std::int64_t t = 0;
  double pkg = 0.0;
  double dram = 0.0;
  double oracle_pkg = 0.0;
  double oracle_dram = 0.0;
  bool kept_pkg = true;
  bool kept_dram = true;

  bool operator==(const SamplePoint &) const = default;
};

/// Stressor attribution for one estimator window.
struct WindowPoint {
  std::int64_t t_start = 0;
  double idle_pkg = 0.0;
  double dyn_pkg = 0.0;
  double idle_dram = 0.0;
  double dyn_dram = 0.0;
  double node_dyn_pkg = 0.0;
  double node_dyn_dram = 0.0;
  /// Sum of dyn_dram over every attribution entry.
  double entries_dyn_dram = 0.0;

  bool operator==(const WindowPoint &) const = default;
};

/// Idle attribution of one entry in one window (completed-pod check).
struct IdleRecord {
  std::int64_t t_start = 0;
  std::string id;
  bool active = true;
  double idle_pkg = 0.0;
  double idle_dram = 0.0;
  double node_idle_pkg = 0.0;
  double node_idle_dram = 0.0;

  bool operator==(const IdleRecord &) const = default;
};

struct StepReport {
  std::string label;
  double step_value = 0.0;
  BaselineStats baseline;
  double oracle_pkg = 0.0;
  double oracle_dram = 0.0;
  double reference_pkg = 0.0;
  double reference_dram = 0.0;
  double estimator_idle_pkg = 0.0;
  double estimator_dyn_pkg = 0.0;
  double estimator_idle_dram = 0.0;
  double estimator_dyn_dram = 0.0;
  double estimator_entries_dyn_dram = 0.0;
  /// Cleaned mean of the measured socket's load series.
  double socket_pkg = 0.0;
  double socket_dram = 0.0;
  double host_bandwidth_fraction = 0.0;
  StabilityStats oracle_pkg_stability;
  StabilityStats oracle_dram_stability;
  StabilityStats estimator_pkg_stability;
  StabilityStats estimator_dram_stability;
  ComparisonVerdict pkg_verdict;
  ComparisonVerdict dram_verdict;
  std::vector<SamplePoint> samples;
  std::vector<WindowPoint> windows;
  std::vector<IdleRecord> idle_records;

  bool operator==(const StepReport &) const = default;
};

struct TestReport {
  int report_version = kReportVersion;
  std::string test_id;
  std::string step_variable;
  std::string estimator_mode;
  std::uint64_t seed = 0;
  std::vector<StepReport> steps;
  bool overall_pass = false;
  nlohmann::json calibration = nlohmann::json::object();

  bool operator==(const TestReport &) const = default;
};

/// Model constants recorded in every report.
nlohmann::json calibration_constants(const ScenarioConfig &cfg);

/// Seed of a test's private noise stream, derived from the run seed.
std::uint64_t test_seed(std::uint64_t seed, const std::string &test_id);

/// One simulated testbed: node, workloads, meter and estimator, advanced in
/// 1 s ticks. Enforces the settle discipline on every aggregated sample.
class Testbed {
public:
  Testbed(const ScenarioConfig &cfg, const std::string &test_id);

  const ScenarioConfig &config() const { return cfg_; }
  const simnode::NodeState &node() const { return node_; }
  workloads::WorkloadSet &workloads() { return set_; }
  const attribution::Estimator &estimator() const { return estimator_; }
  std::int64_t now() const { return t_; }

  void set_frequency(int core_id, double f);
  void set_cstates(int core_id, bool enabled);
  void set_stressor(const workloads::WorkloadSpec &spec);
  /// Pins `count` more native co-runners to free measured-socket cores.
  void add_co_runners(int count);
  /// Deploys guaranteed batch containers that complete after `run_s`.
  void deploy_batch_jobs(int count, int run_s);

  void settle();
  void idle_ticks(int n);
  /// Captures the estimator's fixed idle constants over one window.
  void start_estimator();

  /// Meter statistics of the measured socket with the stressor quiescent.
  /// Throws BaselineRejected when sigma/mean exceeds 1% in either domain.
  BaselineStats measure_baseline(int duration);

  /// Runs one batch of requests and fills the load-phase fields of `step`.
  void run_load(StepReport &step);

  /// Observes idle attribution for `duration` seconds of estimator windows.
  std::vector<IdleRecord> observe_idle(int duration);

private:
  struct Tick {
    std::vector<telemetry::PowerSample> power;
    std::vector<telemetry::UsageSample> usage;
    std::vector<telemetry::CoreSample> cores;
  };
  Tick tick();
  void mark_change();
  void require_settled() const;

  ScenarioConfig cfg_;
  simnode::NodeState node_;
  workloads::WorkloadSet set_;
  telemetry::NoiseModel noise_;
  attribution::Estimator estimator_;
  std::int64_t t_ = 0;
  std::optional<std::int64_t> last_change_;
  int co_runners_ = 0;
};

TestReport run_test1(const ScenarioConfig &cfg);
enum class Test2Step { pkg, dram };
TestReport run_test2(const ScenarioConfig &cfg, Test2Step step);
TestReport run_test3(const ScenarioConfig &cfg);
TestReport run_inactive_pod_check(const ScenarioConfig &cfg);

/// Dispatches on a test id from kTestIds.
TestReport run_test(const ScenarioConfig &cfg, const std::string &test_id);

} // namespace powerbench::valframe
