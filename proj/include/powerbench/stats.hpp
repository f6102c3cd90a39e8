#pragma once

// Summary statistics used by the validation framework.

#include <span>
#include <vector>

namespace powerbench::stats {

double mean(std::span<const double> xs);
/// Sample (n - 1) standard deviation; 0 for fewer than two points.
double sample_stddev(std::span<const double> xs);
/// Quantile with linear interpolation between order statistics.
double quantile(std::span<const double> xs, double q);

struct Fences {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Tukey fences [Q1 - 1.5 IQR, Q3 + 1.5 IQR].
Fences tukey_fences(std::span<const double> xs);

inline constexpr double kMaxTrimFraction = 0.10;
inline constexpr std::size_t kMinCleanLength = 4;

/// true = keep. Throws DataQualityError past the trim cap.
std::vector<bool> outlier_mask(std::span<const double> xs);

/// Drops points outside the Tukey fences. Never drops more than 10%.
std::vector<double> clean_outliers(std::span<const double> xs);

/// sigma / mu * 100 with the sample standard deviation.
double coefficient_of_variation(std::span<const double> xs);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

} // namespace powerbench::stats
