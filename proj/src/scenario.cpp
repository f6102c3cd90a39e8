#include "powerbench/scenario.hpp"

#include "powerbench/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace powerbench::valframe {

using nlohmann::json;

namespace {

/// Rejects keys outside `allowed` so typos in scenario files surface early.
void check_keys(const json &j, const std::string &where, std::initializer_list<const char *> allowed) {
  if (!j.is_object())
    throw ConfigurationError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto &[key, _] : j.items())
    if (!ok.contains(key))
      throw ConfigurationError(where + ": unknown key '" + key + "'");
}

template <class T> void read(const json &j, const char *key, T &out) {
  if (const auto it = j.find(key); it != j.end())
    out = it->get<T>();
}

json residency_json(const simnode::Residency &r) {
  json o = json::object();
  for (std::size_t s = 0; s < simnode::kCStateCount; ++s)
    o[simnode::kCStateNames[s]] = r[s];
  return o;
}

void read_residency(const json &j, const char *key, simnode::Residency &out, const std::string &where) {
  const auto it = j.find(key);
  if (it == j.end())
    return;
  check_keys(*it, where + "." + key, {"C0", "C1", "C3", "C6"});
  for (std::size_t s = 0; s < simnode::kCStateCount; ++s)
    read(*it, simnode::kCStateNames[s], out[s]);
}

json socket_json(const simnode::SocketSpec &s) {
  return json{
      {"core_count", s.core_count},
      {"dvfs",
       {{"f_min", s.dvfs.f_min},
        {"f_max", s.dvfs.f_max},
        {"f_step", s.dvfs.f_step},
        {"v0", s.dvfs.v0},
        {"v_slope", s.dvfs.v_slope},
        {"k_cap", s.dvfs.k_cap}}},
      {"cstates",
       {{"leak_factor", residency_json(s.cstates.leak_factor)},
        {"idle_residency", residency_json(s.cstates.idle_residency)}}},
      {"static_per_core_c0", s.static_per_core_c0},
      {"uncore_freq", s.uncore_freq},
      {"uncore_power", s.uncore_power},
      {"dram_static", s.dram_static},
      {"dram_bw_coeff", s.dram_bw_coeff},
  };
}

void read_socket(const json &j, simnode::SocketSpec &s) {
  check_keys(j, "socket",
             {"core_count", "dvfs", "cstates", "static_per_core_c0", "uncore_freq", "uncore_power", "dram_static",
              "dram_bw_coeff"});
  read(j, "core_count", s.core_count);
  if (const auto it = j.find("dvfs"); it != j.end()) {
    check_keys(*it, "socket.dvfs", {"f_min", "f_max", "f_step", "v0", "v_slope", "k_cap"});
    read(*it, "f_min", s.dvfs.f_min);
    read(*it, "f_max", s.dvfs.f_max);
    read(*it, "f_step", s.dvfs.f_step);
    read(*it, "v0", s.dvfs.v0);
    read(*it, "v_slope", s.dvfs.v_slope);
    read(*it, "k_cap", s.dvfs.k_cap);
  }
  if (const auto it = j.find("cstates"); it != j.end()) {
    check_keys(*it, "socket.cstates", {"leak_factor", "idle_residency"});
    read_residency(*it, "leak_factor", s.cstates.leak_factor, "socket.cstates");
    read_residency(*it, "idle_residency", s.cstates.idle_residency, "socket.cstates");
  }
  read(j, "static_per_core_c0", s.static_per_core_c0);
  read(j, "uncore_freq", s.uncore_freq);
  read(j, "uncore_power", s.uncore_power);
  read(j, "dram_static", s.dram_static);
  read(j, "dram_bw_coeff", s.dram_bw_coeff);
}

json workload_json(const workloads::WorkloadSpec &w) {
  return json{{"kind", workloads::to_string(w.kind)},
              {"cycles_per_request", w.cycles_per_request},
              {"bandwidth_active", w.bandwidth_active},
              {"overhead_per_request", w.overhead_per_request}};
}

void read_workload(const json &j, const std::string &where, workloads::WorkloadSpec &w) {
  check_keys(j, where, {"kind", "cycles_per_request", "bandwidth_active", "overhead_per_request"});
  if (const auto it = j.find("kind"); it != j.end())
    w.kind = workloads::workload_kind_from_string(it->get<std::string>());
  read(j, "cycles_per_request", w.cycles_per_request);
  read(j, "bandwidth_active", w.bandwidth_active);
  read(j, "overhead_per_request", w.overhead_per_request);
}

} // namespace

void ScenarioConfig::validate() const {
  socket.validate();
  if (socket_count < 1)
    throw ConfigurationError("scenario: socket_count must be >= 1");
  if (measured_socket < 0 || measured_socket >= socket_count)
    throw ConfigurationError("scenario: measured_socket out of range");
  if (!(isolation == Isolation{}))
    throw ConfigurationError("scenario: isolation flags must be turbo off, hyperthreading off, C-states off, "
                             "userspace governor, fixed uncore, swap off; only test steps change C-states");
  const int first = measured_socket * socket.core_count;
  const int last = first + socket.core_count - 1;
  if (host_core < first || host_core > last)
    throw ConfigurationError("scenario: host_core must lie on the measured socket");
  if (monitoring.core < first || monitoring.core > last || monitoring.core == host_core)
    throw ConfigurationError("scenario: monitoring core must be a non-host core of the measured socket");
  if (!(0.0 <= monitoring.usage_min && monitoring.usage_min <= monitoring.usage_max && monitoring.usage_max <= 1.0))
    throw ConfigurationError("scenario: monitoring usage range must satisfy 0 <= min <= max <= 1");
  if (monitoring.usage_max * static_cast<double>(monitoring.containers.size()) > 1.0)
    throw ConfigurationError("scenario: monitoring containers would overcommit their shared core");
  if (monitoring.bandwidth_active < 0.0 || monitoring.requested_cores < 0.0)
    throw ConfigurationError("scenario: monitoring bandwidth and requests must be >= 0");
  stressor_cpu.validate();
  stressor_memory.validate();
  if (stressor_cpu.kind != workloads::WorkloadKind::cpu_bound)
    throw ConfigurationError("scenario: stressor_cpu must be cpu_bound");
  if (stressor_memory.kind != workloads::WorkloadKind::memory_bound)
    throw ConfigurationError("scenario: stressor_memory must be memory_bound");
  if (!(stressor_memory_limit_mb > 0.0))
    throw ConfigurationError("scenario: stressor memory limit must be positive");
  if (!(co_runners.utilization > 0.0 && co_runners.utilization <= 1.0) || co_runners.bandwidth_active < 0.0 ||
      !(co_runners.memory_limit_mb > 0.0))
    throw ConfigurationError("scenario: invalid co-runner plan");
  if (co_runners.counts.empty() || !std::is_sorted(co_runners.counts.begin(), co_runners.counts.end()) ||
      co_runners.counts.front() < 0)
    throw ConfigurationError("scenario: co-runner counts must be non-empty, ascending and >= 0");
  if (socket_count > 1 && (background.socket < 0 || background.socket >= socket_count ||
                           background.socket == measured_socket))
    throw ConfigurationError("scenario: background socket must be an unmeasured socket");
  if (!(background.utilization_per_core >= 0.0 && background.utilization_per_core <= 1.0) ||
      background.bandwidth_active < 0.0)
    throw ConfigurationError("scenario: invalid background plan");
  if (inactive.batch_jobs < 0 || inactive.run_s < 1 || inactive.observe_s < 1)
    throw ConfigurationError("scenario: invalid inactive-pod plan");
  if (timing.settle_s < 0 || timing.request_count < 1)
    throw ConfigurationError("scenario: invalid timing");
  if (timing.baseline_s < 30)
    throw ConfigurationError("scenario: baseline duration must be >= 30 s");
  estimator.validate();
  if (!(noise.relative_sigma >= 0.0))
    throw ConfigurationError("scenario: noise sigma must be >= 0");
  if (!(margin > 0.0))
    throw ConfigurationError("scenario: margin must be positive");
}

json to_json(const ScenarioConfig &c) {
  return json{
      {"schema_version", kScenarioSchemaVersion},
      {"name", c.name},
      {"socket", socket_json(c.socket)},
      {"socket_count", c.socket_count},
      {"measured_socket", c.measured_socket},
      {"isolation",
       {{"turbo", c.isolation.turbo},
        {"hyperthreading", c.isolation.hyperthreading},
        {"cstates", c.isolation.cstates},
        {"governor", c.isolation.governor},
        {"uncore_fixed", c.isolation.uncore_fixed},
        {"swap", c.isolation.swap}}},
      {"host_core", c.host_core},
      {"stressor_memory_limit_mb", c.stressor_memory_limit_mb},
      {"stressor_cpu", workload_json(c.stressor_cpu)},
      {"stressor_memory", workload_json(c.stressor_memory)},
      {"co_runners",
       {{"utilization", c.co_runners.utilization},
        {"bandwidth_active", c.co_runners.bandwidth_active},
        {"memory_limit_mb", c.co_runners.memory_limit_mb},
        {"counts", c.co_runners.counts}}},
      {"monitoring",
       {{"containers", c.monitoring.containers},
        {"namespace", c.monitoring.namespace_name},
        {"core", c.monitoring.core},
        {"usage_min", c.monitoring.usage_min},
        {"usage_max", c.monitoring.usage_max},
        {"bandwidth_active", c.monitoring.bandwidth_active},
        {"requested_cores", c.monitoring.requested_cores}}},
      {"background",
       {{"socket", c.background.socket},
        {"utilization_per_core", c.background.utilization_per_core},
        {"bandwidth_active", c.background.bandwidth_active}}},
      {"inactive",
       {{"batch_jobs", c.inactive.batch_jobs},
        {"run_s", c.inactive.run_s},
        {"observe_s", c.inactive.observe_s},
        {"namespace", c.inactive.namespace_name}}},
      {"timing",
       {{"settle_s", c.timing.settle_s},
        {"baseline_s", c.timing.baseline_s},
        {"request_count", c.timing.request_count}}},
      {"estimator",
       {{"mode", attribution::to_string(c.estimator.mode)},
        {"fixed_idle_pkg", c.estimator.fixed_idle_pkg},
        {"fixed_idle_dram", c.estimator.fixed_idle_dram},
        {"idle_underestimate_beta_pkg", c.estimator.idle_underestimate_beta_pkg},
        {"idle_underestimate_beta_dram", c.estimator.idle_underestimate_beta_dram},
        {"window", c.estimator.window}}},
      {"noise", {{"relative_sigma", c.noise.relative_sigma}, {"seed", c.noise.seed}}},
      {"margin", c.margin},
      {"calibration", c.calibration},
  };
}

ScenarioConfig scenario_from_json(const json &j) {
  try {
    check_keys(j, "scenario",
               {"schema_version", "name", "socket", "socket_count", "measured_socket", "isolation", "host_core",
                "stressor_memory_limit_mb", "stressor_cpu", "stressor_memory", "co_runners", "monitoring",
                "background", "inactive", "timing", "estimator", "noise", "margin", "calibration"});
    const int version = j.at("schema_version").get<int>();
    if (version != kScenarioSchemaVersion)
      throw ConfigurationError("scenario: unsupported schema_version " + std::to_string(version));

    ScenarioConfig c;
    read(j, "name", c.name);
    if (const auto it = j.find("socket"); it != j.end())
      read_socket(*it, c.socket);
    read(j, "socket_count", c.socket_count);
    read(j, "measured_socket", c.measured_socket);
    if (const auto it = j.find("isolation"); it != j.end()) {
      check_keys(*it, "isolation", {"turbo", "hyperthreading", "cstates", "governor", "uncore_fixed", "swap"});
      read(*it, "turbo", c.isolation.turbo);
      read(*it, "hyperthreading", c.isolation.hyperthreading);
      read(*it, "cstates", c.isolation.cstates);
      read(*it, "governor", c.isolation.governor);
      read(*it, "uncore_fixed", c.isolation.uncore_fixed);
      read(*it, "swap", c.isolation.swap);
    }
    read(j, "host_core", c.host_core);
    read(j, "stressor_memory_limit_mb", c.stressor_memory_limit_mb);
    if (const auto it = j.find("stressor_cpu"); it != j.end())
      read_workload(*it, "stressor_cpu", c.stressor_cpu);
    if (const auto it = j.find("stressor_memory"); it != j.end())
      read_workload(*it, "stressor_memory", c.stressor_memory);
    if (const auto it = j.find("co_runners"); it != j.end()) {
      check_keys(*it, "co_runners", {"utilization", "bandwidth_active", "memory_limit_mb", "counts"});
      read(*it, "utilization", c.co_runners.utilization);
      read(*it, "bandwidth_active", c.co_runners.bandwidth_active);
      read(*it, "memory_limit_mb", c.co_runners.memory_limit_mb);
      read(*it, "counts", c.co_runners.counts);
    }
    if (const auto it = j.find("monitoring"); it != j.end()) {
      check_keys(*it, "monitoring",
                 {"containers", "namespace", "core", "usage_min", "usage_max", "bandwidth_active",
                  "requested_cores"});
      read(*it, "containers", c.monitoring.containers);
      read(*it, "namespace", c.monitoring.namespace_name);
      read(*it, "core", c.monitoring.core);
      read(*it, "usage_min", c.monitoring.usage_min);
      read(*it, "usage_max", c.monitoring.usage_max);
      read(*it, "bandwidth_active", c.monitoring.bandwidth_active);
      read(*it, "requested_cores", c.monitoring.requested_cores);
    }
    if (const auto it = j.find("background"); it != j.end()) {
      check_keys(*it, "background", {"socket", "utilization_per_core", "bandwidth_active"});
      read(*it, "socket", c.background.socket);
      read(*it, "utilization_per_core", c.background.utilization_per_core);
      read(*it, "bandwidth_active", c.background.bandwidth_active);
    }
    if (const auto it = j.find("inactive"); it != j.end()) {
      check_keys(*it, "inactive", {"batch_jobs", "run_s", "observe_s", "namespace"});
      read(*it, "batch_jobs", c.inactive.batch_jobs);
      read(*it, "run_s", c.inactive.run_s);
      read(*it, "observe_s", c.inactive.observe_s);
      read(*it, "namespace", c.inactive.namespace_name);
    }
    if (const auto it = j.find("timing"); it != j.end()) {
      check_keys(*it, "timing", {"settle_s", "baseline_s", "request_count"});
      read(*it, "settle_s", c.timing.settle_s);
      read(*it, "baseline_s", c.timing.baseline_s);
      read(*it, "request_count", c.timing.request_count);
    }
    if (const auto it = j.find("estimator"); it != j.end()) {
      check_keys(*it, "estimator",
                 {"mode", "fixed_idle_pkg", "fixed_idle_dram", "idle_underestimate_beta_pkg",
                  "idle_underestimate_beta_dram", "window"});
      if (const auto m = it->find("mode"); m != it->end())
        c.estimator.mode = attribution::mode_from_string(m->get<std::string>());
      read(*it, "fixed_idle_pkg", c.estimator.fixed_idle_pkg);
      read(*it, "fixed_idle_dram", c.estimator.fixed_idle_dram);
      read(*it, "idle_underestimate_beta_pkg", c.estimator.idle_underestimate_beta_pkg);
      read(*it, "idle_underestimate_beta_dram", c.estimator.idle_underestimate_beta_dram);
      read(*it, "window", c.estimator.window);
    }
    if (const auto it = j.find("noise"); it != j.end()) {
      check_keys(*it, "noise", {"relative_sigma", "seed"});
      read(*it, "relative_sigma", c.noise.relative_sigma);
      read(*it, "seed", c.noise.seed);
    }
    read(j, "margin", c.margin);
    if (const auto it = j.find("calibration"); it != j.end())
      c.calibration = *it;
    c.validate();
    return c;
  } catch (const json::exception &e) {
    throw ConfigurationError(std::string("scenario: ") + e.what());
  } catch (const InputDomainError &e) {
    throw ConfigurationError(std::string("scenario: ") + e.what());
  }
}

ScenarioConfig load_scenario(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigurationError("cannot open scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception &e) {
    throw ConfigurationError(path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

void save_scenario(const ScenarioConfig &cfg, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write scenario file " + path.string());
  out << to_json(cfg).dump(2) << '\n';
  if (!out)
    throw IoError("failed writing " + path.string());
}

std::string scenario_hash(const ScenarioConfig &cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace powerbench::valframe
