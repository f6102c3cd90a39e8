#include "powerbench/errors.hpp"
#include "powerbench/simnode.hpp"
#include "powerbench/stats.hpp"
#include "powerbench/telemetry.hpp"

#include <doctest.h>

#include <vector>

using namespace powerbench;
using namespace powerbench::telemetry;

namespace {

simnode::PowerBreakdown idle_breakdown() {
  const auto node = simnode::NodeState::make(simnode::SocketSpec{}, 1, 2.6);
  return simnode::socket_power(node, 0);
}

std::vector<double> pkg_series(double sigma, std::uint64_t seed, int n) {
  NoiseModel noise(sigma, seed);
  const auto b = idle_breakdown();
  std::vector<double> out;
  for (int t = 0; t < n; ++t)
    out.push_back(sample_socket(b, noise, t).pkg);
  return out;
}

} // namespace

TEST_CASE("noiseless meter reads the truth") {
  const auto b = idle_breakdown();
  NoiseModel noise(0.0, 1);
  const auto s = sample_socket(b, noise, 5);
  CHECK(s.t == 5);
  CHECK(s.pkg == b.pkg);
  CHECK(s.dram == b.dram);
}

TEST_CASE("meter noise") {
  const auto xs = pkg_series(0.002, 42, 120);
  CHECK(stats::coefficient_of_variation(xs) <= 0.35);
  CHECK(pkg_series(0.002, 42, 120) == xs);
  CHECK(pkg_series(0.002, 43, 120) != xs);
  CHECK_THROWS_AS(NoiseModel(-0.1, 0), InputDomainError);
}

TEST_CASE("window aggregation") {
  const std::vector<double> flat(90, 7.5);
  for (double v : aggregate_window(flat, 30))
    CHECK(v == 7.5);

  CHECK(aggregate_window(std::vector<double>(60, 1.0), 30).size() == 2);
  CHECK(aggregate_window(std::vector<double>(59, 1.0), 30).size() == 1);

  std::vector<double> alt;
  for (int i = 0; i < 60; ++i)
    alt.push_back(i % 2 == 0 ? 3.0 : 5.0);
  for (double v : aggregate_window(alt, 30))
    CHECK(v == doctest::Approx(4.0).epsilon(1e-12));

  CHECK_THROWS_AS(aggregate_window(std::vector<double>{}, 30), EmptyInputError);
  CHECK_THROWS_AS(aggregate_window(alt, 0), InputDomainError);
}
