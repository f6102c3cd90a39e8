#include "powerbench/workloads.hpp"

#include "powerbench/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace powerbench::workloads {

const char *to_string(WorkloadKind kind) {
  switch (kind) {
  case WorkloadKind::cpu_bound:
    return "cpu_bound";
  case WorkloadKind::memory_bound:
    return "memory_bound";
  case WorkloadKind::mixed:
    return "mixed";
  }
  return "?";
}

WorkloadKind workload_kind_from_string(const std::string &s) {
  if (s == "cpu_bound")
    return WorkloadKind::cpu_bound;
  if (s == "memory_bound")
    return WorkloadKind::memory_bound;
  if (s == "mixed")
    return WorkloadKind::mixed;
  throw ConfigurationError("unknown workload kind '" + s + "'");
}

void WorkloadSpec::validate() const {
  if (!(cycles_per_request > 0.0))
    throw ConfigurationError("workload: cycles_per_request must be positive");
  if (!(overhead_per_request >= 0.0))
    throw ConfigurationError("workload: overhead_per_request must be >= 0");
  if (kind == WorkloadKind::cpu_bound && bandwidth_active > 0.2)
    throw ConfigurationError("workload: cpu_bound kind allows at most 0.2 GB/s");
  if (kind == WorkloadKind::memory_bound && bandwidth_active < 5.0)
    throw ConfigurationError("workload: memory_bound kind needs at least 5 GB/s");
  if (bandwidth_active < 0.0)
    throw ConfigurationError("workload: negative bandwidth");
}

void ContainerDeployment::validate() const {
  if (container_id.empty())
    throw ConfigurationError("deployment: empty container id");
  if (requested_cores < 0.0)
    throw ConfigurationError("deployment " + container_id + ": negative core request");
  if (qos == Qos::guaranteed) {
    if (core_id < 0 || requested_cores != 1.0)
      throw ConfigurationError("deployment " + container_id +
                               ": guaranteed QoS needs exactly one pinned core");
    if (!(memory_limit_mb > 0.0))
      throw ConfigurationError("deployment " + container_id + ": guaranteed QoS needs a memory limit");
  }
}

double service_time(const WorkloadSpec &spec, double f) {
  if (!(f > 0.0))
    throw InputDomainError("service_time: frequency must be positive");
  return spec.cycles_per_request / f;
}

double closed_loop_utilization(const WorkloadSpec &spec, double f) {
  const double tc = service_time(spec, f);
  return tc / (tc + spec.overhead_per_request);
}

WorkOverhead calibrate_work_overhead(double u_low, double u_high, double f_low, double f_high,
                                     double overhead) {
  if (!(0.0 < u_high && u_high < u_low && u_low < 1.0))
    throw CalibrationError("calibrate_work_overhead: need 0 < u_high < u_low < 1");
  if (!(0.0 < f_low && f_low < f_high))
    throw CalibrationError("calibrate_work_overhead: need 0 < f_low < f_high");
  if (!(overhead > 0.0))
    throw CalibrationError("calibrate_work_overhead: band needs a positive overhead");
  // u = (c/f) / (c/f + o)  =>  c = o * f * u / (1 - u)
  WorkOverhead out{.cycles_per_request = overhead * f_low * u_low / (1.0 - u_low), .overhead = overhead};
  const WorkloadSpec probe{.cycles_per_request = out.cycles_per_request, .overhead_per_request = overhead};
  const double achieved_high = closed_loop_utilization(probe, f_high);
  if (std::abs(achieved_high - u_high) > 0.01)
    throw CalibrationError("calibrate_work_overhead: utilization at f_high would be " +
                           std::to_string(achieved_high) + ", outside " + std::to_string(u_high) +
                           " +- 0.01");
  return out;
}

ClosedLoop::ClosedLoop(WorkloadSpec spec, RequestSchedule schedule) : spec_(spec), schedule_(schedule) {
  spec_.validate();
  if (schedule_.request_count <= 0)
    throw ConfigurationError("request schedule: request_count must be positive");
}

void ClosedLoop::set_spec(const WorkloadSpec &spec) {
  if (running())
    throw ConfigurationError("cannot swap the stressor workload mid-batch");
  spec.validate();
  spec_ = spec;
}

std::int64_t ClosedLoop::batch_ticks(double f) const {
  const double period = service_time(spec_, f) + spec_.overhead_per_request;
  return std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(schedule_.request_count * period - 1e-9)));
}

void ClosedLoop::start(double f) {
  if (running())
    throw ConfigurationError("closed loop already running");
  ticks_total_ = batch_ticks(f);
  ticks_left_ = ticks_total_;
  completed_ = 0;
  cycles_done_ = 0.0;
}

ClosedLoop::TickWork ClosedLoop::advance(double f) {
  if (!running())
    return {};
  TickWork w;
  w.cpu_fraction = closed_loop_utilization(spec_, f);
  w.cycles = w.cpu_fraction * f;
  w.bandwidth = spec_.bandwidth_active * w.cpu_fraction;
  cycles_done_ += w.cycles;
  --ticks_left_;
  if (ticks_left_ == 0) {
    completed_ = schedule_.request_count;
  } else {
    const auto done = static_cast<int>(std::floor(cycles_done_ / spec_.cycles_per_request + 1e-9));
    completed_ = std::min(done, schedule_.request_count);
  }
  return w;
}

void WorkloadSet::deploy(const ContainerDeployment &d, std::variant<ClosedLoop, SteadyLoad> driver) {
  d.validate();
  for (const auto &i : instances_)
    if (i.id == d.container_id)
      throw ConfigurationError("duplicate workload id " + d.container_id);
  instances_.push_back(Instance{
      .id = d.container_id,
      .is_container = true,
      .core_id = d.core_id,
      .requested_cores = d.requested_cores,
      .qos = d.qos,
      .namespace_name = d.namespace_name,
      .memory_limit_mb = d.memory_limit_mb,
      .lifecycle = d.lifecycle,
      .driver = std::move(driver),
  });
}

void WorkloadSet::launch_native(const std::string &id, int core_id, SteadyLoad load, double memory_limit_mb) {
  for (const auto &i : instances_)
    if (i.id == id)
      throw ConfigurationError("duplicate workload id " + id);
  instances_.push_back(Instance{
      .id = id,
      .is_container = false,
      .core_id = core_id,
      .requested_cores = 0.0,
      .qos = Qos::burstable,
      .namespace_name = "",
      .memory_limit_mb = memory_limit_mb,
      .lifecycle = Lifecycle::active,
      .driver = load,
  });
}

Instance &WorkloadSet::get(const std::string &id) {
  return const_cast<Instance &>(std::as_const(*this).get(id));
}

const Instance &WorkloadSet::get(const std::string &id) const {
  for (const auto &i : instances_)
    if (i.id == id)
      return i;
  throw LookupError("unknown workload " + id);
}

std::vector<ContainerDeployment> WorkloadSet::deployments() const {
  std::vector<ContainerDeployment> out;
  for (const auto &i : instances_) {
    if (!i.is_container)
      continue;
    out.push_back(ContainerDeployment{
        .container_id = i.id,
        .namespace_name = i.namespace_name,
        .core_id = i.core_id,
        .qos = i.qos,
        .memory_limit_mb = i.memory_limit_mb,
        .requested_cores = i.requested_cores,
        .lifecycle = i.lifecycle,
    });
  }
  return out;
}

std::vector<int> WorkloadSet::free_cores(const simnode::NodeState &node, int socket_id) const {
  std::vector<int> out;
  if (socket_id < 0 || socket_id >= static_cast<int>(node.sockets.size()))
    throw LookupError("unknown socket " + std::to_string(socket_id));
  for (const auto &c : node.sockets[static_cast<std::size_t>(socket_id)].cores) {
    const bool taken = std::any_of(instances_.begin(), instances_.end(), [&](const Instance &i) {
      return i.core_id == c.core_id && i.lifecycle == Lifecycle::active;
    });
    if (!taken)
      out.push_back(c.core_id);
  }
  return out;
}

void WorkloadSet::validate_placement(const simnode::NodeState &node) const {
  std::map<int, std::vector<const Instance *>> by_core;
  for (const auto &i : instances_) {
    if (i.lifecycle != Lifecycle::active)
      continue;
    if (i.core_id < 0 || i.core_id >= node.core_count())
      throw ConfigurationError("workload " + i.id + " pinned to unknown core " + std::to_string(i.core_id));
    by_core[i.core_id].push_back(&i);
  }
  for (const auto &[core, tenants] : by_core) {
    if (tenants.size() < 2)
      continue;
    for (const Instance *t : tenants)
      if (t->is_container && t->qos == Qos::guaranteed)
        throw ConfigurationError("core " + std::to_string(core) + " is shared by " +
                                 std::to_string(tenants.size()) + " workloads but hosts guaranteed container " +
                                 t->id);
  }
}

std::vector<telemetry::UsageSample> step_workloads(const simnode::NodeState &node, WorkloadSet &set,
                                                   std::int64_t tick) {
  set.validate_placement(node);
  std::vector<telemetry::UsageSample> out;
  out.reserve(set.instances().size());
  for (auto &inst : set.instances()) {
    telemetry::UsageSample s;
    s.t = tick;
    s.container_id = inst.id;
    s.is_container = inst.is_container;
    s.core_id = inst.core_id;
    s.requested_cores = inst.requested_cores;
    s.active = inst.lifecycle == Lifecycle::active;
    if (s.active) {
      const double f = node.core(inst.core_id).frequency;
      if (auto *loop = std::get_if<ClosedLoop>(&inst.driver)) {
        const auto w = loop->advance(f);
        s.cpu_fraction = w.cpu_fraction;
        s.cycles = w.cycles;
        s.bandwidth = w.bandwidth;
      } else {
        auto &load = std::get<SteadyLoad>(inst.driver);
        s.cpu_fraction = load.utilization;
        s.cycles = load.utilization * f;
        s.bandwidth = load.bandwidth_active * load.utilization;
        ++load.ticks_run;
        if (load.run_ticks && load.ticks_run >= *load.run_ticks)
          inst.lifecycle = Lifecycle::completed;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

void apply_usage(simnode::NodeState &node, std::span<const telemetry::UsageSample> usage) {
  for (auto &socket : node.sockets)
    for (auto &core : socket.cores)
      core.tenants.clear();
  for (const auto &u : usage) {
    if (!u.active || u.core_id < 0)
      continue;
    node.core(u.core_id).tenants.push_back(simnode::Tenant{
        .id = u.container_id,
        .is_container = u.is_container,
        .utilization = u.cpu_fraction,
        .bandwidth = u.bandwidth,
    });
  }
  for (auto &socket : node.sockets)
    for (auto &core : socket.cores)
      simnode::refresh_core(socket.spec, core);
}

} // namespace powerbench::workloads
