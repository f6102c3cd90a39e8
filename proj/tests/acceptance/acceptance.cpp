// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include "powerbench/attribution.hpp"
#include "powerbench/cli.hpp"
#include "powerbench/scenario.hpp"
#include "powerbench/simnode.hpp"
#include "powerbench/stats.hpp"
#include "powerbench/valframe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace powerbench;
using namespace powerbench::valframe;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string &what) {
    if (!ok && pass)
      detail = what;
    pass = pass && ok;
  }
};

std::string fmt(const char *f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

fs::path scenario_path() { return fs::path(POWERBENCH_SOURCE_DIR) / "scenarios" / "default.json"; }

// Criterion 1 ---------------------------------------------------------------

simnode::NodeState random_node(std::mt19937_64 &rng, const simnode::SocketSpec &spec) {
  const auto grid = spec.dvfs.grid();
  std::uniform_int_distribution<std::size_t> pick_f(0, grid.size() - 1);
  std::uniform_int_distribution<int> pick_n(0, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  auto node = simnode::NodeState::make(spec, 2, 2.6);
  for (auto &socket : node.sockets) {
    for (auto &core : socket.cores) {
      core.frequency = grid[pick_f(rng)];
      core.cstates_enabled = coin(rng);
      const int n = pick_n(rng);
      double left = 1.0;
      for (int i = 0; i < n; ++i) {
        const double u = left * unit(rng);
        left -= u;
        core.tenants.push_back(simnode::Tenant{.id = "c" + std::to_string(core.core_id) + "-" + std::to_string(i),
                                               .is_container = coin(rng),
                                               .utilization = u,
                                               .bandwidth = 10.0 * unit(rng)});
      }
      simnode::refresh_core(spec, core);
    }
  }
  node.validate();
  return node;
}

void mutate_core(std::mt19937_64 &rng, simnode::NodeState &node, int core_id) {
  auto &core = node.core(core_id);
  const auto &spec = node.sockets[static_cast<std::size_t>(core.socket_id)].spec;
  const auto grid = spec.dvfs.grid();
  core.frequency = grid[std::uniform_int_distribution<std::size_t>(0, grid.size() - 1)(rng)];
  core.cstates_enabled = !core.cstates_enabled;
  core.tenants.clear();
  core.tenants.push_back(simnode::Tenant{.id = "intruder", .utilization = 0.9, .bandwidth = 7.0});
  simnode::refresh_core(spec, core);
}

Verdict criterion1() {
  Verdict v;
  std::mt19937_64 rng(20240601);
  const simnode::SocketSpec spec;
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    auto node = random_node(rng, spec);
    for (int s = 0; s < 2; ++s) {
      const auto b = simnode::socket_power(node, s);
      double pkg = b.uncore;
      for (std::size_t i = 0; i < b.core_dynamic.size(); ++i)
        pkg += b.core_dynamic[i] + b.core_static[i];
      worst = std::max({worst, std::abs(pkg - b.pkg), std::abs(b.dram_static + b.dram_dynamic - b.dram)});
    }

    // A container, then every kind of change on some other core.
    std::vector<std::pair<int, std::string>> owners;
    for (const auto &socket : node.sockets)
      for (const auto &core : socket.cores)
        for (const auto &t : core.tenants)
          if (t.is_container)
            owners.emplace_back(core.core_id, t.id);
    if (owners.empty())
      continue;
    const auto &[home, id] = owners[std::uniform_int_distribution<std::size_t>(0, owners.size() - 1)(rng)];
    const auto before = simnode::oracle_container_power(node, id);
    int other = home;
    while (other == home)
      other = std::uniform_int_distribution<int>(0, node.core_count() - 1)(rng);
    mutate_core(rng, node, other);
    node = simnode::apply_config(node, simnode::UncoreChange{.socket_id = trial % 2, .frequency = 2.4});
    const auto after = simnode::oracle_container_power(node, id);
    v.require(after.pkg_dynamic == before.pkg_dynamic && after.dram_dynamic == before.dram_dynamic,
              "oracle for " + id + " moved when core " + std::to_string(other) + " changed");
  }
  v.require(worst <= 1e-9, fmt("component sum off by %g W", worst));
  if (v.pass)
    v.detail = fmt("10000 states, worst component-sum error %.3g W, locality bit-identical", worst);
  return v;
}

// Criterion 2 ---------------------------------------------------------------

Verdict criterion2(const ScenarioConfig &base) {
  Verdict v;
  auto cfg = base;
  cfg.noise.relative_sigma = 0.0;
  double worst = 0.0;
  for (const char *id : {"t1", "t2-pkg", "t2-dram", "t3"}) {
    const auto r = run_test(cfg, id);
    for (const auto &s : r.steps) {
      const double e = std::max(std::abs(s.reference_pkg - s.oracle_pkg), std::abs(s.reference_dram - s.oracle_dram));
      worst = std::max(worst, e);
      v.require(e <= 1e-6, std::string(id) + " " + s.label + fmt(": reference off oracle by %g W", e));
    }
  }
  if (v.pass)
    v.detail = fmt("every step of t1, t2-pkg, t2-dram, t3; worst |reference - oracle| = %.3g W", worst);
  return v;
}

// Criteria 3-8 on the default run --------------------------------------------

using Runs = std::map<std::string, TestReport>;

Verdict criterion3(const Runs &runs) {
  Verdict v;
  const auto &steps = runs.at("t1").steps;
  v.require(steps.size() == 9, "expected 9 frequency steps");
  double peak = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto &s = steps[i];
    if (i > 0) {
      v.require(s.oracle_pkg > steps[i - 1].oracle_pkg, "oracle PKG not increasing at " + s.label);
      v.require(s.estimator_dyn_pkg < steps[i - 1].estimator_dyn_pkg, "estimator PKG not decreasing at " + s.label);
    }
    peak = std::max(peak, s.estimator_dyn_pkg / s.oracle_pkg);
    v.require(s.oracle_dram >= 0.01 && s.oracle_dram <= 0.05, fmt("oracle DRAM %g W outside [0.01, 0.05]", s.oracle_dram));
    v.require(s.estimator_dyn_dram >= 0.25 && s.estimator_dyn_dram <= 0.45,
              fmt("estimator DRAM %g W outside [0.25, 0.45]", s.estimator_dyn_dram));
  }
  v.require(peak >= 10.0 && peak <= 20.0, fmt("peak overestimation %.3gx outside [10, 20]", peak));
  if (v.pass)
    v.detail = fmt("peak overestimation %.3gx; oracle DRAM %.3g-%.3g W", peak, steps.back().oracle_dram,
                   steps.front().oracle_dram) +
               fmt("; estimator DRAM %.3g-%.3g W", steps.back().estimator_dyn_dram, steps.front().estimator_dyn_dram);
  return v;
}

Verdict criterion4(const Runs &runs) {
  Verdict v;
  const auto &steps = runs.at("t2-pkg").steps;
  v.require(steps.size() == 7, "expected k = 0, 2, ..., 12");
  std::vector<double> k;
  std::vector<double> share;
  double lo = steps.front().oracle_pkg;
  double hi = lo;
  for (const auto &s : steps) {
    lo = std::min(lo, s.oracle_pkg);
    hi = std::max(hi, s.oracle_pkg);
    if (!share.empty())
      v.require(s.estimator_dyn_pkg <= share.back(), "estimator share rose at " + s.label);
    k.push_back(s.step_value);
    share.push_back(s.estimator_dyn_pkg);
  }
  const double spread = hi / lo - 1.0;
  const double r2 = stats::linear_fit(k, share).r2;
  v.require(spread <= 0.02, fmt("oracle varies %.3g%% across k", 100.0 * spread));
  v.require(r2 >= 0.9, fmt("linear fit R^2 = %.3g", r2));
  if (v.pass)
    v.detail = fmt("oracle spread %.3g%%, share %.3g -> %.3g W", 100.0 * spread, share.front(), share.back()) +
               fmt(", R^2 = %.3g", r2);
  return v;
}

Verdict criterion5(const Runs &runs) {
  Verdict v;
  const auto &steps = runs.at("t2-dram").steps;
  double lo = steps.front().estimator_entries_dyn_dram;
  double hi = lo;
  double min_host = 1.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto &s = steps[i];
    lo = std::min(lo, s.estimator_entries_dyn_dram);
    hi = std::max(hi, s.estimator_entries_dyn_dram);
    min_host = std::min(min_host, s.host_bandwidth_fraction);
    if (i > 0)
      v.require(s.estimator_dyn_dram < steps[i - 1].estimator_dyn_dram, "stressor DRAM share not decreasing at " + s.label);
  }
  const double spread = hi / lo - 1.0;
  v.require(spread <= 0.05, fmt("container DRAM total varies %.3g%%", 100.0 * spread));
  v.require(min_host >= 0.99, fmt("host core carries only %.4g of socket bandwidth", min_host));
  if (v.pass)
    v.detail = fmt("container DRAM total %.4g W, spread %.3g%%", lo, 100.0 * spread) +
               fmt("; host bandwidth fraction >= %.4g", min_host);
  return v;
}

Verdict criterion6(const Runs &runs) {
  Verdict v;
  const auto &steps = runs.at("t3").steps;
  v.require(steps.size() == 2, "expected two steps");
  const double a = steps[0].oracle_pkg;
  const double b = steps[1].oracle_pkg;
  v.require(std::abs(b / a - 1.0) <= 0.05, fmt("oracle %g W vs %g W", a, b));
  for (double o : {a, b})
    v.require(std::abs(o / 2.6 - 1.0) <= 0.05, fmt("oracle %g W outside 2.6 W +- 5%%", o));
  const double ratio = steps[1].estimator_dyn_pkg / steps[0].estimator_dyn_pkg;
  v.require(std::abs(ratio - 0.504) <= 0.10, fmt("estimator ratio %.4g outside 0.504 +- 0.10", ratio));
  if (v.pass)
    v.detail = fmt("oracle %.4g / %.4g W, estimator step-2/step-1 = %.4g", a, b, ratio);
  return v;
}

Verdict criterion7(const Runs &runs) {
  Verdict v;
  const std::vector<workloads::ContainerDeployment> d{{.container_id = "eight", .requested_cores = 8.0}};
  const double share = attribution::allocate_idle(d, 160.0, 64.0).at(0);
  v.require(share == 20.0, fmt("8/64 of 160 W gave %.17g W", share));

  for (const char *id : {"t1", "t2-pkg", "t2-dram"}) {
    const auto &steps = runs.at(id).steps;
    for (const auto &s : steps) {
      v.require(std::abs(s.estimator_idle_pkg - steps.front().estimator_idle_pkg) <= 1e-9,
                std::string(id) + " idle PKG moved at " + s.label);
      v.require(std::abs(s.estimator_idle_dram - steps.front().estimator_idle_dram) <= 1e-9,
                std::string(id) + " idle DRAM moved at " + s.label);
    }
  }

  std::map<std::string, int> completed;
  for (const auto &r : runs.at("inactive").steps.at(0).idle_records) {
    if (r.active)
      continue;
    v.require(r.idle_pkg == 0.0 && r.idle_dram == 0.0, r.id + " completed but got idle power");
    ++completed[r.id];
  }
  v.require(completed.size() == 12, "expected 12 completed containers, saw " + std::to_string(completed.size()));
  if (v.pass)
    v.detail = fmt("8/64 x 160 W = %.3f W; idle constant over sweeps; 12 completed pods at 0 W", share);
  return v;
}

Verdict criterion8(const Runs &runs) {
  Verdict v;
  double oracle_max = 0.0;
  double estimator_max = 0.0;
  for (const char *id : {"t1", "t2-pkg", "t2-dram", "t3"}) {
    for (const auto &s : runs.at(id).steps) {
      for (const auto *st : {&s.oracle_pkg_stability, &s.oracle_dram_stability}) {
        v.require(st->defined, std::string(id) + " " + s.label + ": oracle CV undefined");
        oracle_max = std::max(oracle_max, st->cv_percent);
      }
      for (const auto *st : {&s.estimator_pkg_stability, &s.estimator_dram_stability}) {
        v.require(st->defined, std::string(id) + " " + s.label + ": estimator CV undefined");
        estimator_max = std::max(estimator_max, st->cv_percent);
      }
    }
  }
  v.require(oracle_max <= 0.35, fmt("oracle CV %.3g%% > 0.35%%", oracle_max));
  v.require(estimator_max <= 13.0, fmt("estimator CV %.3g%% > 13%%", estimator_max));
  if (v.pass)
    v.detail = fmt("max oracle CV %.3g%%, max estimator CV %.3g%%", oracle_max, estimator_max);
  return v;
}

// Criterion 9 ---------------------------------------------------------------

bool step_passes(const StepReport &s) {
  bool any = false;
  bool ok = true;
  for (const auto *verdict : {&s.pkg_verdict, &s.dram_verdict}) {
    if (!verdict->defined)
      continue;
    any = true;
    ok = ok && verdict->pass;
  }
  return any && ok;
}

Verdict criterion9(const ScenarioConfig &base) {
  Verdict v;
  auto cfg = base;
  cfg.noise.relative_sigma = 0.0;
  const std::vector<std::vector<std::string>> tests{{"t1"}, {"t2-pkg", "t2-dram"}, {"t3"}};
  int centric_steps = 0;
  int ratio_failures = 0;
  for (const auto &group : tests) {
    bool ratio_failed = false;
    for (const auto &id : group) {
      cfg.estimator.mode = attribution::Mode::resource_centric;
      for (const auto &s : run_test(cfg, id).steps) {
        ++centric_steps;
        v.require(step_passes(s), "resource_centric misses " + id + " " + s.label);
      }
      cfg.estimator.mode = attribution::Mode::kepler_ratio;
      for (const auto &s : run_test(cfg, id).steps) {
        ratio_failed = ratio_failed || !step_passes(s);
        ratio_failures += step_passes(s) ? 0 : 1;
      }
    }
    v.require(ratio_failed, "kepler_ratio passes every step of " + group.front());
  }
  if (v.pass)
    v.detail = "resource_centric passes " + std::to_string(centric_steps) + "/" + std::to_string(centric_steps) +
               " steps; kepler_ratio fails " + std::to_string(ratio_failures) + " steps across all three tests";
  return v;
}

// Criterion 10 --------------------------------------------------------------

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Verdict criterion10() {
  Verdict v;
  const auto root = fs::temp_directory_path() / "powerbench_acceptance_determinism";
  fs::remove_all(root);
  for (const char *sub : {"a", "b"}) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run({"run", scenario_path().string(), "--tests", "all", "--out", (root / sub).string()}, out, err);
    v.require(code == cli::kExitOk, "run exited " + std::to_string(code) + ": " + err.str());
  }
  int files = 0;
  for (const auto &e : fs::directory_iterator(root / "a")) {
    ++files;
    const auto twin = root / "b" / e.path().filename();
    v.require(fs::exists(twin) && slurp(e.path()) == slurp(twin), e.path().filename().string() + " differs");
  }
  v.require(files > 0, "no files written");
  fs::remove_all(root);
  if (v.pass)
    v.detail = std::to_string(files) + " files byte-identical across two runs";
  return v;
}

} // namespace

int main() {
  const auto cfg = load_scenario(scenario_path());
  Runs runs;
  for (const char *id : kTestIds)
    runs.emplace(id, run_test(cfg, id));

  const std::vector<std::pair<const char *, std::function<Verdict()>>> criteria{
      {"oracle additivity and locality", criterion1},
      {"baseline-subtraction exactness", [&] { return criterion2(cfg); }},
      {"test 1 trends", [&] { return criterion3(runs); }},
      {"test 2 pkg", [&] { return criterion4(runs); }},
      {"test 2 dram", [&] { return criterion5(runs); }},
      {"test 3", [&] { return criterion6(runs); }},
      {"idle attribution", [&] { return criterion7(runs); }},
      {"stability table", [&] { return criterion8(runs); }},
      {"discriminative power", [&] { return criterion9(cfg); }},
      {"determinism", criterion10},
  };
  int failed = 0;
  int n = 0;
  for (const auto &[name, check] : criteria) {
    ++n;
    Verdict v;
    try {
      v = check();
    } catch (const std::exception &e) {
      v = Verdict{false, std::string("threw: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("criterion %2d %s: %s (%s)\n", n, v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
  }
  std::printf("%d/%d criteria passed\n", n - failed, n);
  return failed == 0 ? 0 : 1;
}
