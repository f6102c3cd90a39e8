#include "powerbench/stats.hpp"

#include "powerbench/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace powerbench::stats {

double mean(std::span<const double> xs) {
  if (xs.empty())
    throw EmptyInputError("mean of empty series");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_stddev(std::span<const double> xs) {
  if (xs.size() < 2)
    return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs)
    ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double quantile(std::span<const double> xs, double q) {
  if (xs.empty())
    throw EmptyInputError("quantile of empty series");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Fences tukey_fences(std::span<const double> xs) {
  const double q1 = quantile(xs, 0.25);
  const double q3 = quantile(xs, 0.75);
  const double iqr = q3 - q1;
  return Fences{.lo = q1 - 1.5 * iqr, .hi = q3 + 1.5 * iqr};
}

std::vector<bool> outlier_mask(std::span<const double> xs) {
  if (xs.size() < kMinCleanLength)
    throw InputDomainError("clean_outliers: need at least 4 points, got " + std::to_string(xs.size()));
  const Fences f = tukey_fences(xs);
  std::vector<bool> keep(xs.size());
  std::size_t removed = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    keep[i] = f.contains(xs[i]);
    removed += keep[i] ? 0 : 1;
  }
  if (static_cast<double>(removed) > kMaxTrimFraction * static_cast<double>(xs.size()))
    throw DataQualityError("clean_outliers: " + std::to_string(removed) + " of " + std::to_string(xs.size()) +
                           " points fall outside the fences");
  return keep;
}

std::vector<double> clean_outliers(std::span<const double> xs) {
  const auto keep = outlier_mask(xs);
  std::vector<double> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (keep[i])
      out.push_back(xs[i]);
  return out;
}

double coefficient_of_variation(std::span<const double> xs) {
  const double m = mean(xs);
  if (!(m > 0.0))
    throw UndefinedCvError("coefficient_of_variation: mean must be positive");
  return sample_stddev(xs) / m * 100.0;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InputDomainError("linear_fit: need two equally sized series of length >= 2");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0)
    throw InputDomainError("linear_fit: x has no spread");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  // A constant y is fitted perfectly.
  fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

} // namespace powerbench::stats
