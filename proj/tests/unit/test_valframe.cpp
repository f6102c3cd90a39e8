#include "powerbench/errors.hpp"
#include "powerbench/simnode.hpp"
#include "powerbench/valframe.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace powerbench;
using namespace powerbench::valframe;

namespace {

ScenarioConfig quick(double sigma = 0.0) {
  ScenarioConfig cfg;
  cfg.noise.relative_sigma = sigma;
  cfg.timing.settle_s = 5;
  cfg.timing.baseline_s = 30;
  cfg.timing.request_count = 20;
  return cfg;
}

} // namespace

TEST_CASE("compare") {
  const auto ok = compare(100.0, 100.0, 0.05);
  CHECK(ok.defined);
  CHECK(ok.pass);
  const auto off = compare(106.0, 100.0, 0.05);
  CHECK_FALSE(off.pass);
  CHECK(off.deviation_fraction == doctest::Approx(0.06));
  CHECK_THROWS_AS(compare(1.0, 0.0, 0.05), InputDomainError);
}

TEST_CASE("stability") {
  const std::vector<double> flat(30, 4.0);
  const auto s = stability(flat);
  CHECK(s.defined);
  CHECK(s.cv_percent == 0.0);
  const std::vector<double> two{9.0, 11.0};
  CHECK(stability(two).cv_percent == doctest::Approx(14.142135623730951));
  CHECK_FALSE(stability(std::vector<double>{0.0, 0.0}).defined);
}

TEST_CASE("per-test seeds differ") {
  std::set<std::uint64_t> seeds;
  for (const char *id : kTestIds)
    seeds.insert(test_seed(42, id));
  CHECK(seeds.size() == std::size(kTestIds));
  CHECK(test_seed(42, "t1") == test_seed(42, "t1"));
  CHECK(test_seed(42, "t1") != test_seed(43, "t1"));
}

TEST_CASE("samples inside the settle window are refused") {
  const auto cfg = quick();
  Testbed bed(cfg, "t1");
  bed.settle();
  bed.start_estimator();
  bed.set_frequency(cfg.host_core, 1.4);
  CHECK_THROWS_AS(bed.measure_baseline(cfg.timing.baseline_s), InvariantViolation);
}

TEST_CASE("noisy baseline is rejected") {
  const auto cfg = quick(0.05);
  Testbed bed(cfg, "t1");
  bed.settle();
  bed.start_estimator();
  CHECK_THROWS_AS(bed.measure_baseline(cfg.timing.baseline_s), BaselineRejected);
}

TEST_CASE("zero-noise baseline is the true idle") {
  const auto cfg = quick();
  Testbed bed(cfg, "t1");
  bed.settle();
  bed.start_estimator();
  const auto b = bed.measure_baseline(cfg.timing.baseline_s);
  CHECK(b.sigma_pkg <= 1e-9);
  CHECK(b.mean_pkg == doctest::Approx(simnode::socket_power(bed.node(), cfg.measured_socket).pkg).epsilon(1e-12));
}

TEST_CASE("test 1 sweep") {
  const auto r = run_test1(quick());
  REQUIRE(r.steps.size() == 9);
  CHECK(r.steps.front().label == "1.0 GHz");
  CHECK(r.steps.back().step_value == 2.6);
  for (std::size_t i = 1; i < r.steps.size(); ++i) {
    CHECK(r.steps[i].oracle_pkg > r.steps[i - 1].oracle_pkg);
    CHECK(r.steps[i].estimator_idle_pkg == r.steps[0].estimator_idle_pkg);
  }
}

TEST_CASE("test 2 baselines grow with co-runners") {
  const auto r = run_test2(quick(), Test2Step::pkg);
  REQUIRE(r.steps.size() == 7);
  const auto &spec = ScenarioConfig{}.socket;
  const double co_runner = simnode::core_dynamic_power(spec.dvfs, 2.6, 1.0);
  for (std::size_t i = 1; i < r.steps.size(); ++i) {
    CHECK(r.steps[i].baseline.mean_pkg > r.steps[i - 1].baseline.mean_pkg);
    // Two more co-runners at full load, plus their DRAM-free traffic.
    CHECK(r.steps[i].baseline.mean_pkg - r.steps[i - 1].baseline.mean_pkg ==
          doctest::Approx(2.0 * co_runner).epsilon(1e-9));
    CHECK(r.steps[i].estimator_idle_pkg == r.steps[0].estimator_idle_pkg);
  }
}

TEST_CASE("test 3 fixed idle turns the static saving into a dynamic drop") {
  const auto r = run_test3(quick());
  REQUIRE(r.steps.size() == 2);
  const auto &off = r.steps[0];
  const auto &on = r.steps[1];
  CHECK(on.socket_pkg < off.socket_pkg);
  CHECK(on.oracle_pkg == doctest::Approx(off.oracle_pkg).epsilon(1e-12));

  auto node_dyn = [](const StepReport &s) {
    double sum = 0.0;
    for (const auto &w : s.windows)
      sum += w.node_dyn_pkg;
    return sum / static_cast<double>(s.windows.size());
  };
  // Noiseless: the meter delta is the model's static delta.
  const double static_delta = off.socket_pkg - on.socket_pkg;
  CHECK(node_dyn(off) - node_dyn(on) == doctest::Approx(static_delta).epsilon(1e-9));
}

TEST_CASE("completed pods get no idle power") {
  const auto r = run_inactive_pod_check(quick());
  CHECK(r.overall_pass);
  int completed = 0;
  for (const auto &rec : r.steps.at(0).idle_records) {
    if (rec.id.starts_with("batch-")) {
      CHECK_FALSE(rec.active);
      CHECK(rec.idle_pkg == 0.0);
      ++completed;
    }
  }
  CHECK(completed > 0);
  CHECK(completed % 12 == 0);
}

TEST_CASE("scenario validation") {
  auto cfg = ScenarioConfig{};
  CHECK_NOTHROW(cfg.validate());
  cfg.timing.baseline_s = 10;
  CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
  CHECK_THROWS_AS(scenario_from_json(nlohmann::json{{"schema_version", 1}, {"bogus", 1}}), ConfigurationError);
  const auto j = to_json(ScenarioConfig{});
  CHECK(to_json(scenario_from_json(j)) == j);
  CHECK(scenario_hash(ScenarioConfig{}) == scenario_hash(scenario_from_json(j)));
}
