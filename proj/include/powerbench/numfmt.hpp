#pragma once

#include <string>

namespace powerbench::numfmt {

inline constexpr int kSignificantDigits = 6;

/// Rounds to six significant digits; every persisted number goes through this.
double round6(double v);

/// "%.6g" rendering, with -0 normalised to 0.
std::string str(double v);

} // namespace powerbench::numfmt
