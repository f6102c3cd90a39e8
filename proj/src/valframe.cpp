#include "powerbench/valframe.hpp"

#include "powerbench/errors.hpp"
#include "powerbench/numfmt.hpp"
#include "powerbench/stats.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <random>

namespace powerbench::valframe {

using nlohmann::json;

StabilityStats stability(std::span<const double> series) {
  StabilityStats s;
  if (series.empty())
    return s;
  s.mu = stats::mean(series);
  s.sigma = stats::sample_stddev(series);
  if (!(s.mu > 0.0))
    return s;
  s.cv_percent = stats::coefficient_of_variation(series);
  s.defined = true;
  return s;
}

ComparisonVerdict compare(double estimated, double reference, double margin) {
  if (!(reference > 0.0))
    throw InputDomainError("compare: reference must be positive");
  ComparisonVerdict v;
  v.defined = true;
  v.estimated = estimated;
  v.reference = reference;
  v.deviation_fraction = std::abs(estimated - reference) / reference;
  v.pass = v.deviation_fraction <= margin;
  return v;
}

json calibration_constants(const ScenarioConfig &cfg) {
  const auto &s = cfg.socket;
  return json{
      {"k_cap", s.dvfs.k_cap},
      {"v0", s.dvfs.v0},
      {"v_slope", s.dvfs.v_slope},
      {"static_per_core_c0", s.static_per_core_c0},
      {"leak_factor", s.cstates.leak_factor},
      {"idle_residency", s.cstates.idle_residency},
      {"uncore_power", s.uncore_power},
      {"dram_static", s.dram_static},
      {"dram_bw_coeff", s.dram_bw_coeff},
      {"cycles_per_request", cfg.stressor_cpu.cycles_per_request},
      {"overhead_per_request", cfg.stressor_cpu.overhead_per_request},
      {"stressor_cpu_bandwidth", cfg.stressor_cpu.bandwidth_active},
      {"stressor_memory_bandwidth", cfg.stressor_memory.bandwidth_active},
      {"background_utilization", cfg.background.utilization_per_core},
      {"beta_pkg", cfg.estimator.idle_underestimate_beta_pkg},
      {"beta_dram", cfg.estimator.idle_underestimate_beta_dram},
      {"noise_sigma", cfg.noise.relative_sigma},
  };
}

std::uint64_t test_seed(std::uint64_t seed, const std::string &test_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : test_id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finaliser
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::vector<simnode::SocketSpec> platform(const ScenarioConfig &cfg) {
  return std::vector<simnode::SocketSpec>(static_cast<std::size_t>(cfg.socket_count), cfg.socket);
}

double mean_or_zero(std::span<const double> xs) { return xs.empty() ? 0.0 : stats::mean(xs); }

std::vector<double> kept(std::span<const double> xs, const std::vector<bool> &mask) {
  std::vector<double> out;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (mask[i])
      out.push_back(xs[i]);
  return out;
}

/// Window series are short; they are only trimmed from
/// kMinTrimmedWindowSeries points up.
std::vector<double> clean_windows(std::span<const double> xs) {
  if (xs.size() < kMinTrimmedWindowSeries)
    return {xs.begin(), xs.end()};
  return stats::clean_outliers(xs);
}

} // namespace

Testbed::Testbed(const ScenarioConfig &cfg, const std::string &test_id)
    : cfg_(cfg), noise_(cfg.noise.relative_sigma, test_seed(cfg.noise.seed, test_id)),
      estimator_(cfg.estimator, platform(cfg)) {
  cfg_.validate();
  node_ = simnode::NodeState::make(cfg_.socket, cfg_.socket_count, cfg_.socket.dvfs.f_max);

  set_.deploy(
      workloads::ContainerDeployment{
          .container_id = kStressorId,
          .namespace_name = "default",
          .core_id = cfg_.host_core,
          .qos = workloads::Qos::guaranteed,
          .memory_limit_mb = cfg_.stressor_memory_limit_mb,
          .requested_cores = 1.0,
      },
      workloads::ClosedLoop(cfg_.stressor_cpu, workloads::RequestSchedule{.request_count = cfg_.timing.request_count}));

  // Monitoring usage is drawn once per scenario seed, so every test sees the
  // same overhead.
  std::mt19937_64 rng(cfg_.noise.seed);
  std::uniform_real_distribution<double> usage(cfg_.monitoring.usage_min, cfg_.monitoring.usage_max);
  for (const auto &name : cfg_.monitoring.containers) {
    set_.deploy(
        workloads::ContainerDeployment{
            .container_id = name,
            .namespace_name = cfg_.monitoring.namespace_name,
            .core_id = cfg_.monitoring.core,
            .qos = workloads::Qos::burstable,
            .memory_limit_mb = 512.0,
            .requested_cores = cfg_.monitoring.requested_cores,
        },
        workloads::SteadyLoad{.utilization = usage(rng), .bandwidth_active = cfg_.monitoring.bandwidth_active});
  }

  if (cfg_.socket_count > 1) {
    for (const auto &core : node_.sockets[static_cast<std::size_t>(cfg_.background.socket)].cores)
      set_.launch_native("system-" + std::to_string(core.core_id), core.core_id,
                         workloads::SteadyLoad{.utilization = cfg_.background.utilization_per_core,
                                               .bandwidth_active = cfg_.background.bandwidth_active},
                         0.0);
  }
  set_.validate_placement(node_);
  mark_change();
}

void Testbed::mark_change() { last_change_ = t_; }

void Testbed::require_settled() const {
  if (last_change_ && t_ - *last_change_ < cfg_.timing.settle_s)
    throw InvariantViolation("sample at t=" + std::to_string(t_) + " lies within the settle interval of the "
                             "configuration change at t=" + std::to_string(*last_change_));
}

void Testbed::set_frequency(int core_id, double f) {
  const double before = node_.core(core_id).frequency;
  node_ = simnode::apply_config(std::move(node_), simnode::FrequencyChange{core_id, f});
  if (node_.core(core_id).frequency != before)
    mark_change();
}

void Testbed::set_cstates(int core_id, bool enabled) {
  if (node_.core(core_id).cstates_enabled == enabled)
    return;
  node_ = simnode::apply_config(std::move(node_), simnode::CStateChange{core_id, enabled});
  mark_change();
}

void Testbed::set_stressor(const workloads::WorkloadSpec &spec) {
  std::get<workloads::ClosedLoop>(set_.get(kStressorId).driver).set_spec(spec);
  mark_change();
}

void Testbed::add_co_runners(int count) {
  if (count <= 0)
    return;
  const auto free = set_.free_cores(node_, cfg_.measured_socket);
  if (static_cast<int>(free.size()) < count)
    throw ConfigurationError("co-runners: " + std::to_string(count) + " requested but only " +
                             std::to_string(free.size()) + " free cores remain on the measured socket");
  for (int i = 0; i < count; ++i) {
    set_.launch_native("co-runner-" + std::to_string(++co_runners_), free[static_cast<std::size_t>(i)],
                       workloads::SteadyLoad{.utilization = cfg_.co_runners.utilization,
                                             .bandwidth_active = cfg_.co_runners.bandwidth_active},
                       cfg_.co_runners.memory_limit_mb);
  }
  set_.validate_placement(node_);
  mark_change();
}

void Testbed::deploy_batch_jobs(int count, int run_s) {
  const auto free = set_.free_cores(node_, cfg_.measured_socket);
  if (static_cast<int>(free.size()) < count)
    throw ConfigurationError("batch jobs: " + std::to_string(count) + " requested but only " +
                             std::to_string(free.size()) + " free cores remain on the measured socket");
  for (int i = 0; i < count; ++i) {
    set_.deploy(
        workloads::ContainerDeployment{
            .container_id = "batch-" + std::to_string(i + 1),
            .namespace_name = cfg_.inactive.namespace_name,
            .core_id = free[static_cast<std::size_t>(i)],
            .qos = workloads::Qos::guaranteed,
            .memory_limit_mb = cfg_.co_runners.memory_limit_mb,
            .requested_cores = 1.0,
        },
        workloads::SteadyLoad{.utilization = 1.0,
                              .bandwidth_active = cfg_.stressor_cpu.bandwidth_active,
                              .run_ticks = run_s});
  }
  set_.validate_placement(node_);
  mark_change();
}

Testbed::Tick Testbed::tick() {
  Tick k;
  k.usage = workloads::step_workloads(node_, set_, t_);
  workloads::apply_usage(node_, k.usage);
  node_.validate();
  for (std::size_t s = 0; s < node_.sockets.size(); ++s) {
    const auto breakdown = simnode::socket_power(node_, static_cast<int>(s));
    k.power.push_back(telemetry::sample_socket(breakdown, noise_, t_));
    for (const auto &c : node_.sockets[s].cores)
      k.cores.push_back(telemetry::CoreSample{
          .t = t_, .core_id = c.core_id, .socket_id = c.socket_id, .frequency = c.frequency, .residency = c.residency});
  }
  ++t_;
  return k;
}

void Testbed::idle_ticks(int n) {
  for (int i = 0; i < n; ++i)
    tick();
}

void Testbed::settle() { idle_ticks(cfg_.timing.settle_s); }

void Testbed::start_estimator() {
  attribution::WindowAccumulator acc(cfg_.estimator.window);
  for (;;) {
    require_settled();
    auto k = tick();
    if (auto w = acc.add(k.power, k.usage, k.cores)) {
      estimator_.initialize(*w);
      return;
    }
  }
}

BaselineStats Testbed::measure_baseline(int duration) {
  if (duration < 30)
    throw ConfigurationError("baseline duration must be >= 30 s");
  if (std::get<workloads::ClosedLoop>(set_.get(kStressorId).driver).running())
    throw InvariantViolation("baseline requested while the stressor is running");
  std::vector<double> pkg;
  std::vector<double> dram;
  for (int i = 0; i < duration; ++i) {
    require_settled();
    const auto k = tick();
    const auto &m = k.power[static_cast<std::size_t>(cfg_.measured_socket)];
    pkg.push_back(m.pkg);
    dram.push_back(m.dram);
  }
  const auto cp = stats::clean_outliers(pkg);
  const auto cd = stats::clean_outliers(dram);
  BaselineStats b{.duration = duration,
                  .mean_pkg = stats::mean(cp),
                  .mean_dram = stats::mean(cd),
                  .sigma_pkg = stats::sample_stddev(cp),
                  .sigma_dram = stats::sample_stddev(cd)};
  if (b.sigma_pkg > 0.01 * b.mean_pkg || b.sigma_dram > 0.01 * b.mean_dram)
    throw BaselineRejected("baseline at t=" + std::to_string(t_) + " exceeds 1% CV (pkg " +
                           numfmt::str(b.sigma_pkg / b.mean_pkg * 100.0) + "%, dram " +
                           numfmt::str(b.sigma_dram / b.mean_dram * 100.0) + "%)");
  return b;
}

void Testbed::run_load(StepReport &step) {
  auto &loop = std::get<workloads::ClosedLoop>(set_.get(kStressorId).driver);
  loop.start(node_.core(cfg_.host_core).frequency);
  attribution::WindowAccumulator acc(cfg_.estimator.window);
  const auto measured = static_cast<std::size_t>(cfg_.measured_socket);

  std::vector<double> pkg;
  std::vector<double> dram;
  double host_bw = 0.0;
  double socket_bw = 0.0;
  step.samples.clear();
  step.windows.clear();
  while (loop.running()) {
    require_settled();
    const auto k = tick();
    const auto &m = k.power[measured];
    const auto truth = simnode::oracle_container_power(node_, kStressorId);
    step.samples.push_back(SamplePoint{
        .t = m.t, .pkg = m.pkg, .dram = m.dram, .oracle_pkg = truth.pkg_dynamic, .oracle_dram = truth.dram_dynamic});
    pkg.push_back(m.pkg);
    dram.push_back(m.dram);
    host_bw += node_.core(cfg_.host_core).bandwidth();
    for (const auto &c : node_.sockets[measured].cores)
      socket_bw += c.bandwidth();

    if (auto w = acc.add(k.power, k.usage, k.cores)) {
      const auto res = estimator_.estimate(*w);
      const auto &e = res.at(kStressorId);
      double entries_dram = 0.0;
      for (const auto &x : res.entries)
        entries_dram += x.dyn_dram;
      step.windows.push_back(WindowPoint{.t_start = w->t_start,
                                         .idle_pkg = e.idle_pkg,
                                         .dyn_pkg = e.dyn_pkg,
                                         .idle_dram = e.idle_dram,
                                         .dyn_dram = e.dyn_dram,
                                         .node_dyn_pkg = res.node_dyn_pkg,
                                         .node_dyn_dram = res.node_dyn_dram,
                                         .entries_dyn_dram = entries_dram});
    }
  }

  const auto mask_pkg = stats::outlier_mask(pkg);
  const auto mask_dram = stats::outlier_mask(dram);
  std::vector<double> oracle_pkg;
  std::vector<double> oracle_dram;
  for (std::size_t i = 0; i < step.samples.size(); ++i) {
    step.samples[i].kept_pkg = mask_pkg[i];
    step.samples[i].kept_dram = mask_dram[i];
    oracle_pkg.push_back(step.samples[i].oracle_pkg);
    oracle_dram.push_back(step.samples[i].oracle_dram);
  }
  const auto clean_pkg = kept(pkg, mask_pkg);
  const auto clean_dram = kept(dram, mask_dram);
  step.socket_pkg = stats::mean(clean_pkg);
  step.socket_dram = stats::mean(clean_dram);
  step.oracle_pkg = stats::mean(oracle_pkg);
  step.oracle_dram = stats::mean(oracle_dram);
  step.reference_pkg = step.socket_pkg - step.baseline.mean_pkg;
  step.reference_dram = std::max(step.socket_dram - step.baseline.mean_dram, 0.0);
  step.host_bandwidth_fraction = socket_bw > 0.0 ? host_bw / socket_bw : 0.0;
  step.oracle_pkg_stability = stability(clean_pkg);
  step.oracle_dram_stability = stability(clean_dram);

  std::vector<double> idle_pkg;
  std::vector<double> dyn_pkg;
  std::vector<double> idle_dram;
  std::vector<double> dyn_dram;
  std::vector<double> entries_dram;
  for (const auto &w : step.windows) {
    idle_pkg.push_back(w.idle_pkg);
    dyn_pkg.push_back(w.dyn_pkg);
    idle_dram.push_back(w.idle_dram);
    dyn_dram.push_back(w.dyn_dram);
    entries_dram.push_back(w.entries_dyn_dram);
  }
  const auto clean_dyn_pkg = clean_windows(dyn_pkg);
  const auto clean_dyn_dram = clean_windows(dyn_dram);
  step.estimator_idle_pkg = mean_or_zero(clean_windows(idle_pkg));
  step.estimator_dyn_pkg = mean_or_zero(clean_dyn_pkg);
  step.estimator_idle_dram = mean_or_zero(clean_windows(idle_dram));
  step.estimator_dyn_dram = mean_or_zero(clean_dyn_dram);
  step.estimator_entries_dyn_dram = mean_or_zero(clean_windows(entries_dram));
  step.estimator_pkg_stability = stability(clean_dyn_pkg);
  step.estimator_dram_stability = stability(clean_dyn_dram);

  if (step.reference_pkg > 0.0 && !step.windows.empty())
    step.pkg_verdict = compare(step.estimator_dyn_pkg, step.reference_pkg, cfg_.margin);
  if (step.reference_dram > 0.0 && !step.windows.empty())
    step.dram_verdict = compare(step.estimator_dyn_dram, step.reference_dram, cfg_.margin);
}

std::vector<IdleRecord> Testbed::observe_idle(int duration) {
  attribution::WindowAccumulator acc(cfg_.estimator.window);
  std::vector<IdleRecord> out;
  for (int i = 0; i < duration; ++i) {
    require_settled();
    const auto k = tick();
    auto w = acc.add(k.power, k.usage, k.cores);
    if (!w)
      continue;
    std::map<std::string, bool> active;
    for (const auto &u : w->usage)
      active[u.container_id] = u.active;
    const auto res = estimator_.estimate(*w);
    for (const auto &e : res.entries) {
      const auto it = active.find(e.id);
      out.push_back(IdleRecord{.t_start = w->t_start,
                               .id = e.id,
                               .active = it == active.end() || it->second,
                               .idle_pkg = e.idle_pkg,
                               .idle_dram = e.idle_dram,
                               .node_idle_pkg = res.node_idle_pkg,
                               .node_idle_dram = res.node_idle_dram});
    }
  }
  return out;
}

namespace {

TestReport new_report(const ScenarioConfig &cfg, const std::string &test_id, const std::string &step_variable) {
  TestReport r;
  r.test_id = test_id;
  r.step_variable = step_variable;
  r.estimator_mode = attribution::to_string(cfg.estimator.mode);
  r.seed = cfg.noise.seed;
  r.calibration = calibration_constants(cfg);
  return r;
}

/// settle, baseline, one batch of requests, settle.
StepReport measure_step(Testbed &bed, std::string label, double value) {
  StepReport step;
  step.label = std::move(label);
  step.step_value = value;
  bed.settle();
  step.baseline = bed.measure_baseline(bed.config().timing.baseline_s);
  bed.run_load(step);
  bed.settle();
  return step;
}

void finish_verdicts(TestReport &r) {
  r.overall_pass = !r.steps.empty();
  for (const auto &s : r.steps)
    r.overall_pass = r.overall_pass && s.pkg_verdict.defined && s.pkg_verdict.pass && s.dram_verdict.defined &&
                     s.dram_verdict.pass;
}

} // namespace

TestReport run_test1(const ScenarioConfig &cfg) {
  auto report = new_report(cfg, "t1", "frequency_ghz");
  Testbed bed(cfg, report.test_id);
  const auto grid = cfg.socket.dvfs.grid();
  bed.set_frequency(cfg.host_core, grid.front());
  bed.settle();
  bed.start_estimator();
  for (double f : grid) {
    bed.set_frequency(cfg.host_core, f);
    const double actual = bed.node().core(cfg.host_core).frequency;
    char label[32];
    std::snprintf(label, sizeof label, "%.1f GHz", actual);
    report.steps.push_back(measure_step(bed, label, actual));
  }
  finish_verdicts(report);
  return report;
}

TestReport run_test2(const ScenarioConfig &cfg, Test2Step which) {
  auto report = new_report(cfg, which == Test2Step::pkg ? "t2-pkg" : "t2-dram", "co_runners");
  Testbed bed(cfg, report.test_id);
  if (which == Test2Step::dram)
    bed.set_stressor(cfg.stressor_memory);
  bed.settle();
  bed.start_estimator();
  int running = 0;
  for (int k : cfg.co_runners.counts) {
    bed.add_co_runners(k - running);
    running = k;
    report.steps.push_back(measure_step(bed, std::to_string(k) + " co-runners", k));
  }
  finish_verdicts(report);
  return report;
}

TestReport run_test3(const ScenarioConfig &cfg) {
  auto report = new_report(cfg, "t3", "cstates");
  Testbed bed(cfg, report.test_id);
  bed.settle();
  bed.start_estimator();
  report.steps.push_back(measure_step(bed, "C-states off", 0.0));
  const auto &socket = bed.node().sockets[static_cast<std::size_t>(cfg.measured_socket)];
  std::vector<int> targets;
  for (const auto &c : socket.cores)
    if (c.core_id != cfg.host_core)
      targets.push_back(c.core_id);
  for (int id : targets)
    bed.set_cstates(id, true);
  report.steps.push_back(measure_step(bed, "C1/C3/C6 on", 1.0));
  finish_verdicts(report);
  return report;
}

TestReport run_inactive_pod_check(const ScenarioConfig &cfg) {
  auto report = new_report(cfg, "inactive", "lifecycle");
  Testbed bed(cfg, report.test_id);
  bed.settle();
  bed.start_estimator();
  bed.deploy_batch_jobs(cfg.inactive.batch_jobs, cfg.inactive.run_s);
  bed.idle_ticks(cfg.inactive.run_s);

  StepReport step;
  step.label = "completed";
  step.step_value = static_cast<double>(cfg.inactive.batch_jobs);
  step.idle_records = bed.observe_idle(cfg.inactive.observe_s);

  // Pass: completed pods get nothing, active containers get a share, and the
  // entries of each window add up to the node idle estimate.
  bool pass = !step.idle_records.empty();
  std::map<std::int64_t, double> sum_pkg;
  std::map<std::int64_t, double> sum_dram;
  std::map<std::int64_t, const IdleRecord *> node;
  for (const auto &r : step.idle_records) {
    const bool is_batch = r.id.rfind("batch-", 0) == 0;
    if (is_batch)
      pass = pass && !r.active && r.idle_pkg == 0.0 && r.idle_dram == 0.0;
    else if (r.id != attribution::kSystemProcesses)
      pass = pass && r.active && r.idle_pkg > 0.0;
    sum_pkg[r.t_start] += r.idle_pkg;
    sum_dram[r.t_start] += r.idle_dram;
    node[r.t_start] = &r;
  }
  for (const auto &[t, rec] : node)
    pass = pass && std::abs(sum_pkg[t] - rec->node_idle_pkg) <= 1e-9 &&
           std::abs(sum_dram[t] - rec->node_idle_dram) <= 1e-9;
  report.steps.push_back(std::move(step));
  report.overall_pass = pass;
  return report;
}

TestReport run_test(const ScenarioConfig &cfg, const std::string &test_id) {
  if (test_id == "t1")
    return run_test1(cfg);
  if (test_id == "t2-pkg")
    return run_test2(cfg, Test2Step::pkg);
  if (test_id == "t2-dram")
    return run_test2(cfg, Test2Step::dram);
  if (test_id == "t3")
    return run_test3(cfg);
  if (test_id == "inactive")
    return run_inactive_pod_check(cfg);
  throw ConfigurationError("unknown test '" + test_id + "'");
}

} // namespace powerbench::valframe
