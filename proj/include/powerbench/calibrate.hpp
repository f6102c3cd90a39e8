#pragma once

// Solves the model knobs against target bands: a closed form for the
// stressor's cycles/overhead and k_cap, then a grid search verified by a
// full run.

#include "powerbench/scenario.hpp"
#include "powerbench/simnode.hpp"
#include "powerbench/valframe.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace powerbench::calibrate {

struct Band {
  double min = 0.0;
  double max = 0.0;
  bool contains(double v) const { return v >= min && v <= max; }
};

struct Targets {
  // Closed-loop utilization band.
  double u_low = 0.68;
  double u_high = 0.45;
  double f_low = 1.0;
  double f_high = 2.6;
  double overhead = 1.0; // s, fixes the free absolute scale
  // Test-3 oracle container dynamic at f_high.
  double t3_oracle_pkg = 2.6;
  double t3_oracle_tolerance = 0.05; // relative
  Band t1_peak_overestimation{10.0, 20.0};
  double t1_peak_target = 15.0;
  Band t1_oracle_dram{0.01, 0.05};
  Band t1_estimator_dram{0.25, 0.45};
  double t3_ratio = 0.504;
  double t3_ratio_tolerance = 0.10;
  Band idle_full_ratio{0.20, 0.60};
  double t2_r2_min = 0.9;
  double cstate_savings_min = 5.0; // idle static, C-states off over on

  // Search grid.
  std::vector<double> static_per_core_c0{3.0, 3.5, 4.0, 4.5, 5.0};
  std::vector<double> k_cap_scale{0.97, 1.0, 1.03};
  std::vector<simnode::Residency> residency_profiles{{0.0, 0.1, 0.2, 0.7}, {0.0, 0.2, 0.3, 0.5}};
  std::vector<double> beta_pkg;  // empty: 0.30..0.90 in 0.02 steps
  std::vector<double> beta_dram; // empty: 0.05..0.60 in 0.01 steps

  void validate() const;
};

Targets targets_from_json(const nlohmann::json &j);
nlohmann::json to_json(const Targets &t);
Targets load_targets(const std::filesystem::path &path);

struct BandResult {
  std::string name;
  double value = 0.0;
  double min = 0.0;
  double max = 0.0;
  bool ok = false;
};

/// Checks every target band on reports of t1, t2-pkg and t3 (any order).
std::vector<BandResult> evaluate_bands(const valframe::ScenarioConfig &cfg, const Targets &targets,
                                       std::span<const valframe::TestReport> reports);

/// k_cap such that the stressor's dynamic power at f_high equals the target.
double solve_k_cap(const simnode::DvfsModel &dvfs, const workloads::WorkloadSpec &stressor, double f_high,
                   double target_watts);

struct Result {
  valframe::ScenarioConfig scenario;
  std::vector<BandResult> bands;
  std::size_t candidates = 0;
};

/// Throws CalibrationError listing the violated bands when infeasible.
Result calibrate(const Targets &targets, const valframe::ScenarioConfig &base = {});

} // namespace powerbench::calibrate
