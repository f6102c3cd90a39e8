#include "powerbench/simnode.hpp"

#include "powerbench/errors.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace powerbench::simnode {

namespace {

constexpr double kGridTolerance = 1e-9;

std::string fmt_ghz(double f) { return std::to_string(f) + " GHz"; }

void check_fraction(double u, const char *what) {
  if (!(u >= 0.0 && u <= 1.0))
    throw InputDomainError(std::string(what) + " must lie in [0, 1], got " + std::to_string(u));
}

} // namespace

bool DvfsModel::on_grid(double f) const {
  if (f < f_min - kGridTolerance || f > f_max + kGridTolerance)
    return false;
  const double steps = (f - f_min) / f_step;
  return std::abs(steps - std::round(steps)) < 1e-6;
}

std::vector<double> DvfsModel::grid() const {
  std::vector<double> out;
  const auto n = static_cast<int>(std::round((f_max - f_min) / f_step));
  out.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i)
    out.push_back(f_min + f_step * i);
  return out;
}

void DvfsModel::validate() const {
  if (!(f_min > 0.0 && f_min < f_max))
    throw InputDomainError("dvfs: need 0 < f_min < f_max");
  if (!(f_step > 0.0))
    throw InputDomainError("dvfs: f_step must be positive");
  if (!on_grid(f_max))
    throw InputDomainError("dvfs: f_max is not reachable from f_min in f_step increments");
  if (!(v0 > 0.0 && v_slope > 0.0))
    throw InputDomainError("dvfs: voltage curve must be positive and strictly increasing");
  if (!(k_cap > 0.0))
    throw InputDomainError("dvfs: k_cap must be positive");
}

void CStateModel::validate() const {
  if (leak_factor[0] != 1.0)
    throw InvariantViolation("cstates: leak factor of C0 must be 1");
  for (std::size_t s = 1; s < kCStateCount; ++s) {
    if (!(leak_factor[s] >= 0.0 && leak_factor[s] < leak_factor[s - 1]))
      throw InvariantViolation("cstates: leak factors must be non-negative and strictly decreasing");
  }
  if (idle_residency[0] != 0.0)
    throw InvariantViolation("cstates: idle residency profile cannot contain C0");
  double sum = 0.0;
  for (double r : idle_residency) {
    if (r < 0.0)
      throw InvariantViolation("cstates: negative residency in idle profile");
    sum += r;
  }
  if (std::abs(sum - 1.0) > kSumTolerance)
    throw InvariantViolation("cstates: idle residency profile must sum to 1");
}

double CStateModel::idle_leak() const {
  double acc = 0.0;
  for (std::size_t s = 0; s < kCStateCount; ++s)
    acc += idle_residency[s] * leak_factor[s];
  return acc;
}

void SocketSpec::validate() const {
  if (core_count <= 0)
    throw InputDomainError("socket: core_count must be positive");
  dvfs.validate();
  cstates.validate();
  if (static_per_core_c0 < 0.0 || uncore_power < 0.0 || dram_static < 0.0 || dram_bw_coeff < 0.0)
    throw InputDomainError("socket: power constants must be non-negative");
  const double ratio = idle_power() / full_load_power();
  if (ratio < 0.20 || ratio > 0.60)
    throw InvariantViolation("socket: idle/full-load ratio " + std::to_string(ratio) +
                             " outside [0.20, 0.60]");
}

double SocketSpec::idle_power() const { return core_count * static_per_core_c0 + uncore_power; }

double SocketSpec::full_load_power() const {
  return idle_power() + core_count * core_dynamic_power(dvfs, dvfs.f_max, 1.0);
}

double CoreState::bandwidth() const {
  double bw = 0.0;
  for (const auto &t : tenants)
    bw += t.bandwidth;
  return bw;
}

NodeState NodeState::make(const SocketSpec &spec, int socket_count, double initial_frequency) {
  spec.validate();
  if (socket_count <= 0)
    throw InputDomainError("node: need at least one socket");
  if (!spec.dvfs.on_grid(initial_frequency))
    throw InputDomainError("node: initial frequency " + fmt_ghz(initial_frequency) + " off grid");
  NodeState node;
  int next_core = 0;
  for (int s = 0; s < socket_count; ++s) {
    SocketState socket;
    socket.spec = spec;
    socket.uncore_freq = spec.uncore_freq;
    for (int c = 0; c < spec.core_count; ++c) {
      CoreState core;
      core.core_id = next_core++;
      core.socket_id = s;
      core.frequency = initial_frequency;
      socket.cores.push_back(core);
    }
    node.sockets.push_back(std::move(socket));
  }
  return node;
}

const CoreState &NodeState::core(int core_id) const {
  for (const auto &s : sockets)
    for (const auto &c : s.cores)
      if (c.core_id == core_id)
        return c;
  throw LookupError("unknown core " + std::to_string(core_id));
}

CoreState &NodeState::core(int core_id) {
  return const_cast<CoreState &>(std::as_const(*this).core(core_id));
}

int NodeState::core_count() const {
  int n = 0;
  for (const auto &s : sockets)
    n += static_cast<int>(s.cores.size());
  return n;
}

void NodeState::validate() const {
  for (const auto &s : sockets) {
    for (const auto &c : s.cores) {
      if (!s.spec.dvfs.on_grid(c.frequency))
        throw InvariantViolation("core " + std::to_string(c.core_id) + ": frequency off grid");
      if (!(c.utilization >= 0.0 && c.utilization <= 1.0 + kSumTolerance))
        throw InvariantViolation("core " + std::to_string(c.core_id) + ": utilization outside [0,1]");
      double sum = 0.0;
      for (double r : c.residency) {
        if (r < -kSumTolerance)
          throw InvariantViolation("core " + std::to_string(c.core_id) + ": negative residency");
        sum += r;
      }
      if (std::abs(sum - 1.0) > kSumTolerance)
        throw InvariantViolation("core " + std::to_string(c.core_id) + ": residency does not sum to 1");
      if (!c.cstates_enabled && c.residency[0] != 1.0)
        throw InvariantViolation("core " + std::to_string(c.core_id) +
                                 ": C-states disabled but residency is not 100% C0");
    }
  }
}

double core_dynamic_power(const DvfsModel &dvfs, double f, double u) {
  if (!dvfs.on_grid(f))
    throw InputDomainError("core_dynamic_power: frequency " + fmt_ghz(f) + " off grid");
  check_fraction(u, "utilization");
  return dvfs.k_cap * dvfs.switching_factor(f) * u;
}

double core_static_power(const SocketSpec &spec, const CoreState &core) {
  double sum = 0.0;
  double weighted = 0.0;
  for (std::size_t s = 0; s < kCStateCount; ++s) {
    sum += core.residency[s];
    weighted += core.residency[s] * spec.cstates.leak_factor[s];
  }
  if (std::abs(sum - 1.0) > kSumTolerance)
    throw InvariantViolation("core_static_power: residency of core " + std::to_string(core.core_id) +
                             " sums to " + std::to_string(sum));
  return spec.static_per_core_c0 * weighted;
}

double dram_power(const SocketSpec &spec, double total_bandwidth) {
  if (!(total_bandwidth >= 0.0))
    throw InputDomainError("dram_power: negative bandwidth");
  return spec.dram_static + spec.dram_bw_coeff * total_bandwidth;
}

Residency derive_residency(const CStateModel &model, bool cstates_enabled, double utilization) {
  check_fraction(utilization, "utilization");
  if (!cstates_enabled)
    return Residency{1.0, 0.0, 0.0, 0.0};
  const double idle = 1.0 - utilization;
  Residency r{};
  r[0] = utilization;
  for (std::size_t s = 1; s < kCStateCount; ++s)
    r[s] = idle * model.idle_residency[s];
  return r;
}

void refresh_core(const SocketSpec &spec, CoreState &core) {
  double u = 0.0;
  for (const auto &t : core.tenants) {
    check_fraction(t.utilization, "tenant utilization");
    if (t.bandwidth < 0.0)
      throw InputDomainError("tenant bandwidth must be non-negative");
    u += t.utilization;
  }
  if (u > 1.0 + kSumTolerance)
    throw InvariantViolation("core " + std::to_string(core.core_id) + " oversubscribed: u = " +
                             std::to_string(u));
  core.utilization = std::min(u, 1.0);
  core.residency = derive_residency(spec.cstates, core.cstates_enabled, core.utilization);
}

PowerBreakdown socket_power(const NodeState &state, int socket_id) {
  if (socket_id < 0 || socket_id >= static_cast<int>(state.sockets.size()))
    throw LookupError("unknown socket " + std::to_string(socket_id));
  const SocketState &socket = state.sockets[static_cast<std::size_t>(socket_id)];
  const SocketSpec &spec = socket.spec;

  PowerBreakdown out;
  out.socket_id = socket_id;
  out.core_dynamic.reserve(socket.cores.size());
  out.core_static.reserve(socket.cores.size());
  double bandwidth = 0.0;
  for (const auto &core : socket.cores) {
    out.core_dynamic.push_back(core_dynamic_power(spec.dvfs, core.frequency, core.utilization));
    out.core_static.push_back(core_static_power(spec, core));
    bandwidth += core.bandwidth();
  }
  out.uncore = spec.uncore_power;
  out.dram_static = spec.dram_static;
  out.dram_dynamic = dram_power(spec, bandwidth) - spec.dram_static;

  out.pkg = std::accumulate(out.core_dynamic.begin(), out.core_dynamic.end(), 0.0) +
            std::accumulate(out.core_static.begin(), out.core_static.end(), 0.0) + out.uncore;
  out.dram = out.dram_static + out.dram_dynamic;
  return out;
}

ContainerTruth oracle_container_power(const NodeState &state, const std::string &container_id) {
  const Tenant *found = nullptr;
  const CoreState *host = nullptr;
  const SocketSpec *spec = nullptr;
  for (const auto &s : state.sockets) {
    for (const auto &c : s.cores) {
      for (const auto &t : c.tenants) {
        if (t.is_container && t.id == container_id) {
          if (found != nullptr)
            throw LookupError("container " + container_id + " is pinned to more than one core");
          found = &t;
          host = &c;
          spec = &s.spec;
        }
      }
    }
  }
  if (found == nullptr)
    throw LookupError("container " + container_id + " is not pinned to any core");
  return ContainerTruth{
      .pkg_dynamic = core_dynamic_power(spec->dvfs, host->frequency, found->utilization),
      .dram_dynamic = spec->dram_bw_coeff * found->bandwidth,
  };
}

NodeState apply_config(NodeState state, const ConfigChange &change) {
  std::visit(
      [&state](const auto &c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, FrequencyChange>) {
          CoreState *core = nullptr;
          try {
            core = &state.core(c.core_id);
          } catch (const LookupError &e) {
            throw InputDomainError(e.what());
          }
          const auto &spec = state.sockets[static_cast<std::size_t>(core->socket_id)].spec;
          if (!spec.dvfs.on_grid(c.frequency))
            throw InputDomainError("apply_config: frequency " + fmt_ghz(c.frequency) + " off grid");
          core->frequency = spec.dvfs.f_min + spec.dvfs.f_step *
                                                  std::round((c.frequency - spec.dvfs.f_min) / spec.dvfs.f_step);
        } else if constexpr (std::is_same_v<T, CStateChange>) {
          CoreState *core = nullptr;
          try {
            core = &state.core(c.core_id);
          } catch (const LookupError &e) {
            throw InputDomainError(e.what());
          }
          core->cstates_enabled = c.enabled;
          refresh_core(state.sockets[static_cast<std::size_t>(core->socket_id)].spec, *core);
        } else {
          if (c.socket_id < 0 || c.socket_id >= static_cast<int>(state.sockets.size()))
            throw InputDomainError("apply_config: unknown socket " + std::to_string(c.socket_id));
          auto &socket = state.sockets[static_cast<std::size_t>(c.socket_id)];
          if (std::abs(c.frequency - socket.spec.uncore_freq) > kGridTolerance)
            throw InputDomainError("apply_config: uncore frequency is fixed at " +
                                   fmt_ghz(socket.spec.uncore_freq));
          socket.uncore_freq = socket.spec.uncore_freq;
        }
      },
      change);
  state.validate();
  return state;
}

} // namespace powerbench::simnode
