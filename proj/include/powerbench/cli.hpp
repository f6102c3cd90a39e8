#pragma once

// powerbench command line: run, calibrate, report and list-scenarios.

#include <iosfwd>
#include <string>
#include <vector>

namespace powerbench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInvariant = 3;
inline constexpr int kExitCalibration = 4;

/// `args` excludes the program name. Diagnostics go to `err`.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace powerbench::cli
