#include "powerbench/errors.hpp"
#include "powerbench/numfmt.hpp"
#include "powerbench/stats.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

using namespace powerbench;
using namespace powerbench::stats;

TEST_CASE("coefficient of variation") {
  const std::vector<double> flat(20, 3.0);
  CHECK(coefficient_of_variation(flat) == 0.0);
  const std::vector<double> two{9.0, 11.0};
  // stddev sqrt(2) over mean 10.
  CHECK(coefficient_of_variation(two) == doctest::Approx(14.142135623730951).epsilon(1e-12));
  CHECK_THROWS_AS(coefficient_of_variation(std::vector<double>{0.0, 0.0}), UndefinedCvError);
}

TEST_CASE("outlier cleaning") {
  const std::vector<double> flat(50, 2.0);
  CHECK(clean_outliers(flat) == flat);

  std::vector<double> spike(100, 10.0);
  spike[37] = 100.0;
  const auto cleaned = clean_outliers(spike);
  CHECK(cleaned.size() == 99);
  CHECK(std::find(cleaned.begin(), cleaned.end(), 100.0) == cleaned.end());

  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(100.0, 0.2);
  std::vector<double> gauss;
  for (int i = 0; i < 2000; ++i)
    gauss.push_back(n(rng));
  CHECK(gauss.size() - clean_outliers(gauss).size() <= 20);
}

TEST_CASE("linear fit") {
  const std::vector<double> x{0, 2, 4, 6};
  const std::vector<double> y{1, 5, 9, 13};
  const auto fit = linear_fit(x, y);
  CHECK(fit.slope == doctest::Approx(2.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
  CHECK(fit.r2 == doctest::Approx(1.0));
}

TEST_CASE("six significant digits") {
  CHECK(numfmt::round6(3.14159265) == 3.14159);
  CHECK(numfmt::round6(0.000123456789) == 0.000123457);
  CHECK(numfmt::str(2.5) == "2.5");
  CHECK(numfmt::round6(numfmt::round6(1.0 / 3.0)) == numfmt::round6(1.0 / 3.0));
}
