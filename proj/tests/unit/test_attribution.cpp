#include "powerbench/attribution.hpp"
#include "powerbench/errors.hpp"

#include <doctest.h>

#include <vector>

using namespace powerbench;
using namespace powerbench::attribution;
using telemetry::CoreSample;
using telemetry::UsageSample;

namespace {

UsageSample usage(const std::string &id, double cpu, int core = 0, double bw = 0.0) {
  return UsageSample{.container_id = id, .core_id = core, .cpu_fraction = cpu, .bandwidth = bw};
}

} // namespace

TEST_CASE("fixed idle split") {
  CHECK(split_node_power(80.0, 80.0).idle == 80.0);
  CHECK(split_node_power(80.0, 80.0).dynamic == 0.0);
  CHECK(split_node_power(70.0, 80.0).idle == 70.0);
  CHECK(split_node_power(70.0, 80.0).dynamic == 0.0);
  CHECK(split_node_power(95.0, 80.0).dynamic == 15.0);
}

TEST_CASE("idle allocation by reserved cores") {
  const std::vector<workloads::ContainerDeployment> d{
      {.container_id = "big", .requested_cores = 8.0},
      {.container_id = "done", .requested_cores = 8.0, .lifecycle = workloads::Lifecycle::completed},
  };
  const auto idle = allocate_idle(d, 160.0, 64.0);
  CHECK(idle[0] == 20.0);
  CHECK(idle[1] == 0.0);
  CHECK_THROWS_AS(allocate_idle(d, 160.0, 4.0), ConfigurationError);
}

TEST_CASE("ratio dynamic allocation") {
  const std::vector<UsageSample> one{usage("a", 0.75), usage("b", 0.25)};
  CHECK(allocate_dynamic_ratio(one, 40.0, Domain::pkg)[0] == doctest::Approx(30.0));

  const std::vector<UsageSample> solo{usage("a", 0.3), usage("b", 0.0)};
  CHECK(allocate_dynamic_ratio(solo, 12.0, Domain::pkg)[0] == 12.0);

  const std::vector<UsageSample> monitored{usage("stressor", 0.45), usage("kepler", 0.03), usage("prometheus", 0.03),
                                           usage("grafana", 0.03)};
  const auto share = allocate_dynamic_ratio(monitored, 10.0, Domain::dram);
  CHECK(share[0] == doctest::Approx(10.0 * 0.45 / 0.54).epsilon(1e-12));

  const std::vector<UsageSample> quiet{usage("a", 0.0)};
  CHECK(allocate_dynamic_ratio(quiet, 5.0, Domain::pkg)[0] == 0.0);
}

TEST_CASE("resource-centric dynamic allocation") {
  const simnode::DvfsModel dvfs;
  const std::vector<CoreSample> cores{{.core_id = 0, .frequency = 1.0}, {.core_id = 1, .frequency = 2.6}};

  const std::vector<UsageSample> mem{usage("cpu", 0.5, 0, 0.0), usage("mem", 0.5, 1, 4.0)};
  const auto s = allocate_dynamic_resource_centric(mem, 10.0, 2.0, cores, dvfs);
  CHECK(s.dram[0] == 0.0);
  CHECK(s.dram[1] == 2.0);

  // Equal cycles: u * f the same on both cores.
  const std::vector<UsageSample> equal_work{usage("slow", 0.52, 0), usage("fast", 0.2, 1)};
  const auto e = allocate_dynamic_resource_centric(equal_work, 10.0, 0.0, cores, dvfs);
  CHECK(e.pkg[1] > e.pkg[0]);
  CHECK(e.pkg[0] + e.pkg[1] == doctest::Approx(10.0));

  const std::vector<UsageSample> unmapped{usage("x", 0.5, 9)};
  CHECK_THROWS_AS(allocate_dynamic_resource_centric(unmapped, 1.0, 0.0, cores, dvfs), ConfigurationError);
}

TEST_CASE("estimator config validation") {
  CHECK_NOTHROW(EstimatorConfig{}.validate());
  CHECK_THROWS_AS(EstimatorConfig{.idle_underestimate_beta_pkg = 0.0}.validate(), ConfigurationError);
  CHECK_THROWS_AS(EstimatorConfig{.idle_underestimate_beta_dram = 1.5}.validate(), ConfigurationError);
  CHECK_THROWS_AS(EstimatorConfig{.window = 0}.validate(), ConfigurationError);
  CHECK(mode_from_string("resource_centric") == Mode::resource_centric);
  CHECK_THROWS_AS(mode_from_string("psychic"), ConfigurationError);
}

TEST_CASE("estimator needs its idle constants first") {
  const Estimator est(EstimatorConfig{}, {simnode::SocketSpec{}});
  CHECK_FALSE(est.initialized());
  CHECK_THROWS_AS(est.estimate(WindowInput{}), InvariantViolation);
}

TEST_CASE("window accumulator") {
  WindowAccumulator acc(2);
  const std::vector<telemetry::PowerSample> p1{{.t = 0, .pkg = 10.0, .dram = 2.0}};
  const std::vector<telemetry::PowerSample> p2{{.t = 1, .pkg = 20.0, .dram = 4.0}};
  const std::vector<UsageSample> u{usage("a", 0.5)};
  const std::vector<CoreSample> c{{.core_id = 0, .frequency = 2.6}};
  CHECK_FALSE(acc.add(p1, u, c).has_value());
  const auto w = acc.add(p2, u, c);
  REQUIRE(w.has_value());
  CHECK(w->node_pkg == 15.0);
  CHECK(w->node_dram == 3.0);
  CHECK(w->usage.at(0).cpu_fraction == 0.5);
}
