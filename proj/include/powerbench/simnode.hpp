#pragma once

// Simulated multi-socket server: per-core DVFS and C-state power, fixed
// uncore, linear DRAM, plus the privileged per-container truth.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace powerbench::simnode {

inline constexpr double kSumTolerance = 1e-9;

/// Frequency/voltage operating curve. V(f) is linear in f from f_min.
struct DvfsModel {
  double f_min = 1.0;  // GHz
  double f_max = 2.6;  // GHz
  double f_step = 0.2; // GHz
  double v0 = 0.6;      // volts at f_min
  double v_slope = 0.25; // volts per GHz
  double k_cap = 2.22353; // W / (V^2 * GHz)

  double voltage(double f) const { return v0 + v_slope * (f - f_min); }

  /// V(f)^2 * f, the frequency-dependent factor of dynamic power.
  double switching_factor(double f) const {
    const double v = voltage(f);
    return v * v * f;
  }

  bool on_grid(double f) const;
  /// Grid frequencies from f_min to f_max inclusive.
  std::vector<double> grid() const;
  /// Throws InputDomainError when the model is not usable.
  void validate() const;

  bool operator==(const DvfsModel &) const = default;
};

enum class CState : std::size_t { C0 = 0, C1 = 1, C3 = 2, C6 = 3 };
inline constexpr std::size_t kCStateCount = 4;
inline constexpr std::array<const char *, kCStateCount> kCStateNames{"C0", "C1", "C3", "C6"};

/// Time fractions per C-state, indexed by CState.
using Residency = std::array<double, kCStateCount>;

struct CStateModel {
  /// Relative leakage per state; C0 = 1 and strictly decreasing.
  Residency leak_factor{1.0, 0.55, 0.25, 0.05};
  /// Share of idle time spent in each state. The C0 entry is unused (0).
  Residency idle_residency{0.0, 0.1, 0.2, 0.7};

  void validate() const;
  /// Static-power scale of a fully idle core under the profile.
  double idle_leak() const;

  bool operator==(const CStateModel &) const = default;
};

struct SocketSpec {
  int core_count = 14;
  DvfsModel dvfs;
  CStateModel cstates;
  double static_per_core_c0 = 4.0; // W
  double uncore_freq = 2.4;        // GHz, fixed
  double uncore_power = 10.0;      // W at uncore_freq
  double dram_static = 3.0;        // W
  double dram_bw_coeff = 0.3;      // W per GB/s

  void validate() const;
  /// Socket power with every core in C0 and zero utilization.
  double idle_power() const;
  /// Socket power with every core at f_max and full utilization.
  double full_load_power() const;

  bool operator==(const SocketSpec &) const = default;
};

/// Something running on a core: a container or a native process.
struct Tenant {
  std::string id;
  bool is_container = true;
  double utilization = 0.0; // fraction of the core this tick
  double bandwidth = 0.0;   // GB/s this tick

  bool operator==(const Tenant &) const = default;
};

struct CoreState {
  int core_id = 0;
  int socket_id = 0;
  double frequency = 2.6;
  bool cstates_enabled = false;
  /// Pinned tenants. A guaranteed-QoS container is the only tenant of its core.
  std::vector<Tenant> tenants;
  double utilization = 0.0;
  Residency residency{1.0, 0.0, 0.0, 0.0};

  double bandwidth() const;
  bool operator==(const CoreState &) const = default;
};

struct SocketState {
  SocketSpec spec;
  std::vector<CoreState> cores;
  double uncore_freq = 2.4;

  bool operator==(const SocketState &) const = default;
};

struct NodeState {
  std::vector<SocketState> sockets;

  /// Builds `socket_count` identical sockets; cores are numbered globally.
  static NodeState make(const SocketSpec &spec, int socket_count, double initial_frequency);

  const CoreState &core(int core_id) const;
  CoreState &core(int core_id);
  int core_count() const;
  /// Throws InvariantViolation on the first broken CoreState invariant.
  void validate() const;

  bool operator==(const NodeState &) const = default;
};

struct PowerBreakdown {
  int socket_id = 0;
  std::vector<double> core_dynamic;
  std::vector<double> core_static;
  double uncore = 0.0;
  double dram_static = 0.0;
  double dram_dynamic = 0.0;
  double pkg = 0.0;
  double dram = 0.0;
};

struct ContainerTruth {
  double pkg_dynamic = 0.0;
  double dram_dynamic = 0.0;
};

double core_dynamic_power(const DvfsModel &dvfs, double f, double u);
double core_static_power(const SocketSpec &spec, const CoreState &core);
double dram_power(const SocketSpec &spec, double total_bandwidth);

/// Residency implied by utilization: busy time in C0, idle time spread over
/// the idle profile when C-states are enabled, else all C0.
Residency derive_residency(const CStateModel &model, bool cstates_enabled, double utilization);

PowerBreakdown socket_power(const NodeState &state, int socket_id);

/// Ground-truth dynamic power of one container: its own share of its core's
/// switching power and its own DRAM traffic.
ContainerTruth oracle_container_power(const NodeState &state, const std::string &container_id);

struct FrequencyChange {
  int core_id;
  double frequency;
};
struct CStateChange {
  int core_id;
  bool enabled;
};
struct UncoreChange {
  int socket_id;
  double frequency;
};
using ConfigChange = std::variant<FrequencyChange, CStateChange, UncoreChange>;

NodeState apply_config(NodeState state, const ConfigChange &change);

/// Recomputes utilization and residency from the core's tenants.
void refresh_core(const SocketSpec &spec, CoreState &core);

} // namespace powerbench::simnode
