#include "powerbench/attribution.hpp"

#include "powerbench/errors.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace powerbench::attribution {

const char *to_string(Mode mode) {
  return mode == Mode::kepler_ratio ? "kepler_ratio" : "resource_centric";
}

Mode mode_from_string(const std::string &s) {
  if (s == "kepler_ratio")
    return Mode::kepler_ratio;
  if (s == "resource_centric")
    return Mode::resource_centric;
  throw ConfigurationError("unknown estimator mode '" + s + "'");
}

void EstimatorConfig::validate() const {
  auto beta_ok = [](double b) { return b > 0.0 && b <= 1.0; };
  if (!beta_ok(idle_underestimate_beta_pkg) || !beta_ok(idle_underestimate_beta_dram))
    throw ConfigurationError("estimator: betas must lie in (0, 1]");
  if (window < 1)
    throw ConfigurationError("estimator: window must be >= 1 s");
  if (fixed_idle_pkg < 0.0 || fixed_idle_dram < 0.0)
    throw ConfigurationError("estimator: fixed idle constants must be >= 0");
}

const EntryAttribution &AttributionResult::at(const std::string &id) const {
  for (const auto &e : entries)
    if (e.id == id)
      return e;
  throw LookupError("no attribution entry for " + id);
}

PowerSplit split_node_power(double total, double fixed_idle) {
  return PowerSplit{.idle = std::min(total, fixed_idle), .dynamic = std::max(total - fixed_idle, 0.0)};
}

std::vector<double> allocate_idle(std::span<const workloads::ContainerDeployment> deployments, double node_idle,
                                  double total_cores) {
  if (!(total_cores > 0.0))
    throw ConfigurationError("allocate_idle: total_cores must be positive");
  std::vector<double> out;
  out.reserve(deployments.size());
  for (const auto &d : deployments) {
    if (d.requested_cores > total_cores)
      throw ConfigurationError("allocate_idle: " + d.container_id + " requests more cores than the node has");
    out.push_back(d.lifecycle == workloads::Lifecycle::active ? node_idle * d.requested_cores / total_cores
                                                              : 0.0);
  }
  return out;
}

std::vector<double> allocate_dynamic_ratio(std::span<const telemetry::UsageSample> usages, double node_dyn,
                                           Domain /*domain*/) {
  // The DRAM pool is split by CPU time as well; memory activity is ignored.
  double total = 0.0;
  for (const auto &u : usages) {
    if (u.cpu_fraction < 0.0)
      throw InputDomainError("allocate_dynamic_ratio: negative usage for " + u.container_id);
    total += u.cpu_fraction;
  }
  std::vector<double> out(usages.size(), 0.0);
  if (total <= 0.0)
    return out;
  for (std::size_t i = 0; i < usages.size(); ++i)
    out[i] = node_dyn * usages[i].cpu_fraction / total;
  return out;
}

namespace {

std::vector<double> proportional(std::span<const double> weights, double pool) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> out(weights.size(), 0.0);
  if (total <= 0.0)
    return out;
  for (std::size_t i = 0; i < weights.size(); ++i)
    out[i] = pool * weights[i] / total;
  return out;
}

} // namespace

DomainShares allocate_dynamic_resource_centric(std::span<const telemetry::UsageSample> usages,
                                               double node_dyn_pkg, double node_dyn_dram,
                                               std::span<const telemetry::CoreSample> cores,
                                               const simnode::DvfsModel &dvfs) {
  std::map<int, double> freq;
  for (const auto &c : cores)
    freq[c.core_id] = c.frequency;
  std::vector<double> pkg_w;
  std::vector<double> dram_w;
  pkg_w.reserve(usages.size());
  dram_w.reserve(usages.size());
  for (const auto &u : usages) {
    if (u.cpu_fraction < 0.0 || u.bandwidth < 0.0)
      throw InputDomainError("allocate_dynamic_resource_centric: negative usage for " + u.container_id);
    if (!u.active || u.cpu_fraction == 0.0) {
      pkg_w.push_back(0.0);
      dram_w.push_back(u.active ? u.bandwidth : 0.0);
      continue;
    }
    const auto it = freq.find(u.core_id);
    if (it == freq.end())
      throw ConfigurationError("allocate_dynamic_resource_centric: " + u.container_id + " has no core mapping");
    pkg_w.push_back(dvfs.switching_factor(it->second) * u.cpu_fraction);
    dram_w.push_back(u.bandwidth);
  }
  return DomainShares{.pkg = proportional(pkg_w, node_dyn_pkg), .dram = proportional(dram_w, node_dyn_dram)};
}

StaticEstimate static_estimate(std::span<const simnode::SocketSpec> sockets,
                               std::span<const telemetry::CoreSample> cores) {
  StaticEstimate out;
  for (const auto &s : sockets) {
    out.pkg += s.uncore_power;
    out.dram += s.dram_static;
  }
  for (const auto &c : cores) {
    if (c.socket_id < 0 || c.socket_id >= static_cast<int>(sockets.size()))
      throw ConfigurationError("static_estimate: core on unknown socket");
    const auto &spec = sockets[static_cast<std::size_t>(c.socket_id)];
    double leak = 0.0;
    for (std::size_t s = 0; s < simnode::kCStateCount; ++s)
      leak += c.residency[s] * spec.cstates.leak_factor[s];
    out.pkg += spec.static_per_core_c0 * leak;
  }
  return out;
}

WindowAccumulator::WindowAccumulator(int window) : window_(window) {
  if (window < 1)
    throw ConfigurationError("window must be >= 1 s");
}

void WindowAccumulator::reset() {
  count_ = 0;
  acc_ = WindowInput{};
}

std::optional<WindowInput> WindowAccumulator::add(std::span<const telemetry::PowerSample> power,
                                                  std::span<const telemetry::UsageSample> usage,
                                                  std::span<const telemetry::CoreSample> cores) {
  if (count_ == 0) {
    acc_ = WindowInput{};
    acc_.t_start = usage.empty() ? (power.empty() ? 0 : power.front().t) : usage.front().t;
    acc_.usage.assign(usage.begin(), usage.end());
    for (auto &u : acc_.usage) {
      u.cpu_fraction = 0.0;
      u.cycles = 0.0;
      u.bandwidth = 0.0;
    }
    acc_.cores.assign(cores.begin(), cores.end());
    for (auto &c : acc_.cores) {
      c.frequency = 0.0;
      c.residency = {};
    }
  }
  if (usage.size() != acc_.usage.size() || cores.size() != acc_.cores.size())
    throw InvariantViolation("window: the set of workloads changed inside a window");
  for (const auto &p : power) {
    acc_.node_pkg += p.pkg;
    acc_.node_dram += p.dram;
  }
  for (std::size_t i = 0; i < usage.size(); ++i) {
    auto &a = acc_.usage[i];
    if (a.container_id != usage[i].container_id)
      throw InvariantViolation("window: workload order changed inside a window");
    a.cpu_fraction += usage[i].cpu_fraction;
    a.cycles += usage[i].cycles;
    a.bandwidth += usage[i].bandwidth;
    a.active = usage[i].active;
  }
  for (std::size_t i = 0; i < cores.size(); ++i) {
    acc_.cores[i].frequency += cores[i].frequency;
    for (std::size_t s = 0; s < simnode::kCStateCount; ++s)
      acc_.cores[i].residency[s] += cores[i].residency[s];
  }
  if (++count_ < window_)
    return std::nullopt;

  const double n = static_cast<double>(window_);
  WindowInput out = std::move(acc_);
  out.node_pkg /= n;
  out.node_dram /= n;
  for (auto &u : out.usage) {
    u.cpu_fraction /= n;
    u.cycles /= n;
    u.bandwidth /= n;
  }
  for (auto &c : out.cores) {
    c.frequency /= n;
    for (auto &r : c.residency)
      r /= n;
  }
  reset();
  return out;
}

Estimator::Estimator(EstimatorConfig config, std::vector<simnode::SocketSpec> platform)
    : config_(config), platform_(std::move(platform)) {
  config_.validate();
  if (platform_.empty())
    throw ConfigurationError("estimator: empty platform");
  for (const auto &s : platform_)
    total_cores_ += s.core_count;
}

void Estimator::initialize(const WindowInput &start) {
  fixed_idle_pkg_ = config_.fixed_idle_pkg > 0.0 ? config_.fixed_idle_pkg
                                                 : config_.idle_underestimate_beta_pkg * start.node_pkg;
  fixed_idle_dram_ = config_.fixed_idle_dram > 0.0 ? config_.fixed_idle_dram
                                                   : config_.idle_underestimate_beta_dram * start.node_dram;
  initialized_ = true;
}

AttributionResult Estimator::estimate(const WindowInput &window) const {
  if (config_.mode == Mode::kepler_ratio && !initialized_)
    throw InvariantViolation("estimator used before its idle constants were captured");

  PowerSplit pkg;
  PowerSplit dram;
  if (config_.mode == Mode::kepler_ratio) {
    pkg = split_node_power(window.node_pkg, fixed_idle_pkg_);
    dram = split_node_power(window.node_dram, fixed_idle_dram_);
  } else {
    const StaticEstimate idle = static_estimate(platform_, window.cores);
    pkg = split_node_power(window.node_pkg, idle.pkg);
    dram = split_node_power(window.node_dram, idle.dram);
  }

  std::vector<workloads::ContainerDeployment> deployments;
  std::vector<std::size_t> container_rows;
  for (std::size_t i = 0; i < window.usage.size(); ++i) {
    const auto &u = window.usage[i];
    if (!u.is_container)
      continue;
    deployments.push_back(workloads::ContainerDeployment{
        .container_id = u.container_id,
        .core_id = u.core_id,
        .qos = workloads::Qos::burstable,
        .requested_cores = u.requested_cores,
        .lifecycle = u.active ? workloads::Lifecycle::active : workloads::Lifecycle::completed,
    });
    container_rows.push_back(i);
  }
  const auto idle_pkg = allocate_idle(deployments, pkg.idle, total_cores_);
  const auto idle_dram = allocate_idle(deployments, dram.idle, total_cores_);

  std::vector<double> dyn_pkg;
  std::vector<double> dyn_dram;
  if (config_.mode == Mode::kepler_ratio) {
    dyn_pkg = allocate_dynamic_ratio(window.usage, pkg.dynamic, Domain::pkg);
    dyn_dram = allocate_dynamic_ratio(window.usage, dram.dynamic, Domain::dram);
  } else {
    auto shares =
        allocate_dynamic_resource_centric(window.usage, pkg.dynamic, dram.dynamic, window.cores, platform_.front().dvfs);
    dyn_pkg = std::move(shares.pkg);
    dyn_dram = std::move(shares.dram);
  }

  AttributionResult out;
  out.node_idle_pkg = pkg.idle;
  out.node_idle_dram = dram.idle;
  out.node_dyn_pkg = pkg.dynamic;
  out.node_dyn_dram = dram.dynamic;

  EntryAttribution system{.id = kSystemProcesses, .is_container = false};
  std::size_t c = 0;
  for (std::size_t i = 0; i < window.usage.size(); ++i) {
    const auto &u = window.usage[i];
    if (u.is_container) {
      out.entries.push_back(EntryAttribution{
          .id = u.container_id,
          .is_container = true,
          .idle_pkg = idle_pkg[c],
          .dyn_pkg = dyn_pkg[i],
          .idle_dram = idle_dram[c],
          .dyn_dram = dyn_dram[i],
      });
      ++c;
    } else {
      system.dyn_pkg += dyn_pkg[i];
      system.dyn_dram += dyn_dram[i];
    }
  }
  system.idle_pkg = pkg.idle - std::accumulate(idle_pkg.begin(), idle_pkg.end(), 0.0);
  system.idle_dram = dram.idle - std::accumulate(idle_dram.begin(), idle_dram.end(), 0.0);
  if (system.idle_pkg < -1e-9 || system.idle_dram < -1e-9)
    throw ConfigurationError("estimator: containers reserve more cores than the node has");
  system.idle_pkg = std::max(system.idle_pkg, 0.0);
  system.idle_dram = std::max(system.idle_dram, 0.0);
  out.entries.push_back(system);
  return out;
}

} // namespace powerbench::attribution
