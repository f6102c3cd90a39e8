#include "powerbench/numfmt.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace powerbench::numfmt {

std::string str(double v) {
  if (v == 0.0)
    v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*g", kSignificantDigits, v);
  return buf;
}

double round6(double v) {
  if (!std::isfinite(v))
    return v;
  return std::strtod(str(v).c_str(), nullptr);
}

} // namespace powerbench::numfmt
