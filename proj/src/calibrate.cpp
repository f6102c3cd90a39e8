#include "powerbench/calibrate.hpp"

#include "powerbench/errors.hpp"
#include "powerbench/numfmt.hpp"
#include "powerbench/stats.hpp"
#include "powerbench/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>

namespace powerbench::calibrate {

using nlohmann::json;
using valframe::ScenarioConfig;
using valframe::TestReport;

namespace {

std::vector<double> steps(double lo, double hi, double step) {
  std::vector<double> out;
  const auto n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int i = 0; i <= n; ++i)
    out.push_back(numfmt::round6(lo + step * i));
  return out;
}

void check_keys(const json &j, const std::string &where, std::initializer_list<const char *> allowed) {
  if (!j.is_object())
    throw ConfigurationError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto &[key, _] : j.items())
    if (!ok.contains(key))
      throw ConfigurationError(where + ": unknown key '" + key + "'");
}

template <class T> void read(const json &j, const char *key, T &out) {
  if (const auto it = j.find(key); it != j.end())
    out = it->get<T>();
}

void read_band(const json &j, const char *key, Band &b) {
  if (const auto it = j.find(key); it != j.end()) {
    check_keys(*it, key, {"min", "max"});
    read(*it, "min", b.min);
    read(*it, "max", b.max);
  }
}

json band_json(const Band &b) { return json{{"min", b.min}, {"max", b.max}}; }

const TestReport &find(std::span<const TestReport> reports, const std::string &id) {
  for (const auto &r : reports)
    if (r.test_id == id)
      return r;
  throw InvariantViolation("calibration: missing " + id + " report");
}

BandResult band(std::string name, double value, double lo, double hi) {
  return BandResult{.name = std::move(name), .value = value, .min = lo, .max = hi, .ok = value >= lo && value <= hi};
}

BandResult flag(std::string name, bool holds) {
  return BandResult{.name = std::move(name), .value = holds ? 1.0 : 0.0, .min = 1.0, .max = 1.0, .ok = holds};
}

bool all_ok(const std::vector<BandResult> &bands) {
  return std::all_of(bands.begin(), bands.end(), [](const BandResult &b) { return b.ok; });
}

std::string violated(const std::vector<BandResult> &bands) {
  std::string out;
  for (const auto &b : bands)
    if (!b.ok)
      out += "\n  " + b.name + " = " + numfmt::str(b.value) + " outside [" + numfmt::str(b.min) + ", " +
             numfmt::str(b.max) + "]";
  return out;
}

/// Short noiseless protocol used to score candidates.
ScenarioConfig probe_config(ScenarioConfig cfg) {
  cfg.noise.relative_sigma = 0.0;
  cfg.timing.settle_s = 0;
  cfg.timing.baseline_s = 30;
  cfg.timing.request_count = 20;
  cfg.estimator.mode = attribution::Mode::kepler_ratio;
  return cfg;
}

std::vector<TestReport> run_probe(const ScenarioConfig &cfg) {
  return {valframe::run_test1(cfg), valframe::run_test2(cfg, valframe::Test2Step::pkg), valframe::run_test3(cfg)};
}

double peak_overestimation(const TestReport &t1) {
  double peak = 0.0;
  for (const auto &s : t1.steps)
    if (s.oracle_pkg > 0.0)
      peak = std::max(peak, s.estimator_dyn_pkg / s.oracle_pkg);
  return peak;
}

/// Distance from the point targets, used to rank feasible candidates.
double score(const Targets &t, std::span<const TestReport> reports) {
  const auto &t1 = find(reports, "t1");
  const auto &t3 = find(reports, "t3");
  const double width = (t.t1_peak_overestimation.max - t.t1_peak_overestimation.min) / 2.0;
  const double ratio = t3.steps.at(1).estimator_dyn_pkg / t3.steps.at(0).estimator_dyn_pkg;
  const double oracle = t3.steps.at(0).oracle_pkg;
  return std::abs(peak_overestimation(t1) - t.t1_peak_target) / width +
         std::abs(ratio - t.t3_ratio) / t.t3_ratio_tolerance +
         std::abs(oracle / t.t3_oracle_pkg - 1.0) / t.t3_oracle_tolerance;
}

struct Candidate {
  ScenarioConfig cfg;
  std::vector<BandResult> bands;
  double score = std::numeric_limits<double>::infinity();
};

} // namespace

void Targets::validate() const {
  if (!(0.0 < u_high && u_high < u_low && u_low < 1.0) || !(0.0 < f_low && f_low < f_high) || !(overhead > 0.0))
    throw ConfigurationError("targets: utilization band needs 0 < u_high < u_low < 1 and f_low < f_high");
  if (!(t3_oracle_pkg > 0.0) || !(t3_oracle_tolerance > 0.0) || !(t3_ratio_tolerance > 0.0))
    throw ConfigurationError("targets: Test-3 targets must be positive");
  for (const Band *b : {&t1_peak_overestimation, &t1_oracle_dram, &t1_estimator_dram, &idle_full_ratio})
    if (!(b->min <= b->max))
      throw ConfigurationError("targets: band with min > max");
  if (static_per_core_c0.empty() || k_cap_scale.empty() || residency_profiles.empty())
    throw ConfigurationError("targets: empty search grid");
  for (double b : beta_pkg)
    if (!(b > 0.0 && b <= 1.0))
      throw ConfigurationError("targets: beta_pkg grid values must lie in (0, 1]");
  for (double b : beta_dram)
    if (!(b > 0.0 && b <= 1.0))
      throw ConfigurationError("targets: beta_dram grid values must lie in (0, 1]");
}

Targets targets_from_json(const json &j) {
  try {
    check_keys(j, "targets",
               {"schema_version", "utilization", "t3_oracle_pkg", "t1_peak_overestimation", "t1_oracle_dram",
                "t1_estimator_dram", "t3_ratio", "idle_full_ratio", "t2_r2_min", "cstate_savings_min", "search"});
    if (j.at("schema_version").get<int>() != valframe::kScenarioSchemaVersion)
      throw ConfigurationError("targets: unsupported schema_version");
    Targets t;
    if (const auto it = j.find("utilization"); it != j.end()) {
      check_keys(*it, "utilization", {"u_low", "u_high", "f_low", "f_high", "overhead"});
      read(*it, "u_low", t.u_low);
      read(*it, "u_high", t.u_high);
      read(*it, "f_low", t.f_low);
      read(*it, "f_high", t.f_high);
      read(*it, "overhead", t.overhead);
    }
    if (const auto it = j.find("t3_oracle_pkg"); it != j.end()) {
      check_keys(*it, "t3_oracle_pkg", {"target", "tolerance"});
      read(*it, "target", t.t3_oracle_pkg);
      read(*it, "tolerance", t.t3_oracle_tolerance);
    }
    if (const auto it = j.find("t1_peak_overestimation"); it != j.end()) {
      check_keys(*it, "t1_peak_overestimation", {"min", "max", "target"});
      read(*it, "min", t.t1_peak_overestimation.min);
      read(*it, "max", t.t1_peak_overestimation.max);
      read(*it, "target", t.t1_peak_target);
    }
    read_band(j, "t1_oracle_dram", t.t1_oracle_dram);
    read_band(j, "t1_estimator_dram", t.t1_estimator_dram);
    if (const auto it = j.find("t3_ratio"); it != j.end()) {
      check_keys(*it, "t3_ratio", {"target", "tolerance"});
      read(*it, "target", t.t3_ratio);
      read(*it, "tolerance", t.t3_ratio_tolerance);
    }
    read_band(j, "idle_full_ratio", t.idle_full_ratio);
    read(j, "t2_r2_min", t.t2_r2_min);
    read(j, "cstate_savings_min", t.cstate_savings_min);
    if (const auto it = j.find("search"); it != j.end()) {
      check_keys(*it, "search", {"static_per_core_c0", "k_cap_scale", "residency_profiles", "beta_pkg", "beta_dram"});
      read(*it, "static_per_core_c0", t.static_per_core_c0);
      read(*it, "k_cap_scale", t.k_cap_scale);
      read(*it, "beta_pkg", t.beta_pkg);
      read(*it, "beta_dram", t.beta_dram);
      if (const auto p = it->find("residency_profiles"); p != it->end()) {
        t.residency_profiles.clear();
        for (const auto &profile : *p) {
          check_keys(profile, "residency profile", {"C1", "C3", "C6"});
          t.residency_profiles.push_back(
              {0.0, profile.at("C1").get<double>(), profile.at("C3").get<double>(), profile.at("C6").get<double>()});
        }
      }
    }
    t.validate();
    return t;
  } catch (const json::exception &e) {
    throw ConfigurationError(std::string("targets: ") + e.what());
  }
}

json to_json(const Targets &t) {
  json profiles = json::array();
  for (const auto &p : t.residency_profiles)
    profiles.push_back(json{{"C1", p[1]}, {"C3", p[2]}, {"C6", p[3]}});
  return json{
      {"schema_version", valframe::kScenarioSchemaVersion},
      {"utilization",
       {{"u_low", t.u_low}, {"u_high", t.u_high}, {"f_low", t.f_low}, {"f_high", t.f_high}, {"overhead", t.overhead}}},
      {"t3_oracle_pkg", {{"target", t.t3_oracle_pkg}, {"tolerance", t.t3_oracle_tolerance}}},
      {"t1_peak_overestimation",
       {{"min", t.t1_peak_overestimation.min},
        {"max", t.t1_peak_overestimation.max},
        {"target", t.t1_peak_target}}},
      {"t1_oracle_dram", band_json(t.t1_oracle_dram)},
      {"t1_estimator_dram", band_json(t.t1_estimator_dram)},
      {"t3_ratio", {{"target", t.t3_ratio}, {"tolerance", t.t3_ratio_tolerance}}},
      {"idle_full_ratio", band_json(t.idle_full_ratio)},
      {"t2_r2_min", t.t2_r2_min},
      {"cstate_savings_min", t.cstate_savings_min},
      {"search",
       {{"static_per_core_c0", t.static_per_core_c0},
        {"k_cap_scale", t.k_cap_scale},
        {"residency_profiles", profiles},
        {"beta_pkg", t.beta_pkg},
        {"beta_dram", t.beta_dram}}},
  };
}

Targets load_targets(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigurationError("cannot open targets file " + path.string());
  try {
    return targets_from_json(json::parse(in));
  } catch (const json::exception &e) {
    throw ConfigurationError(path.string() + ": " + e.what());
  }
}

double solve_k_cap(const simnode::DvfsModel &dvfs, const workloads::WorkloadSpec &stressor, double f_high,
                   double target_watts) {
  const double u = workloads::closed_loop_utilization(stressor, f_high);
  const double denom = dvfs.switching_factor(f_high) * u;
  if (!(denom > 0.0))
    throw CalibrationError("solve_k_cap: stressor has no dynamic activity at f_high");
  return target_watts / denom;
}

std::vector<BandResult> evaluate_bands(const ScenarioConfig &cfg, const Targets &t,
                                       std::span<const TestReport> reports) {
  std::vector<BandResult> out;
  const auto &t1 = find(reports, "t1");
  const auto &t2 = find(reports, "t2-pkg");
  const auto &t3 = find(reports, "t3");

  const double u_high = workloads::closed_loop_utilization(cfg.stressor_cpu, t.f_high);
  out.push_back(band("utilization_at_f_high", u_high, t.u_high - 0.01, t.u_high + 0.01));
  out.push_back(band("idle_full_ratio", cfg.socket.idle_power() / cfg.socket.full_load_power(), t.idle_full_ratio.min,
                     t.idle_full_ratio.max));
  out.push_back(band("cstate_savings_factor", 1.0 / cfg.socket.cstates.idle_leak(), t.cstate_savings_min,
                     1.0 / cfg.socket.cstates.leak_factor[3]));

  bool oracle_up = true;
  bool estimator_down = true;
  double dram_oracle_lo = std::numeric_limits<double>::infinity();
  double dram_oracle_hi = -dram_oracle_lo;
  double dram_est_lo = dram_oracle_lo;
  double dram_est_hi = -dram_oracle_lo;
  for (std::size_t i = 0; i < t1.steps.size(); ++i) {
    const auto &s = t1.steps[i];
    if (i > 0) {
      oracle_up = oracle_up && s.oracle_pkg > t1.steps[i - 1].oracle_pkg;
      estimator_down = estimator_down && s.estimator_dyn_pkg < t1.steps[i - 1].estimator_dyn_pkg;
    }
    dram_oracle_lo = std::min(dram_oracle_lo, s.oracle_dram);
    dram_oracle_hi = std::max(dram_oracle_hi, s.oracle_dram);
    dram_est_lo = std::min(dram_est_lo, s.estimator_dyn_dram);
    dram_est_hi = std::max(dram_est_hi, s.estimator_dyn_dram);
  }
  out.push_back(flag("t1_oracle_pkg_increasing", oracle_up));
  out.push_back(flag("t1_estimator_pkg_decreasing", estimator_down));
  out.push_back(band("t1_peak_overestimation", peak_overestimation(t1), t.t1_peak_overestimation.min,
                     t.t1_peak_overestimation.max));
  out.push_back(band("t1_oracle_dram_min", dram_oracle_lo, t.t1_oracle_dram.min, t.t1_oracle_dram.max));
  out.push_back(band("t1_oracle_dram_max", dram_oracle_hi, t.t1_oracle_dram.min, t.t1_oracle_dram.max));
  out.push_back(band("t1_estimator_dram_min", dram_est_lo, t.t1_estimator_dram.min, t.t1_estimator_dram.max));
  out.push_back(band("t1_estimator_dram_max", dram_est_hi, t.t1_estimator_dram.min, t.t1_estimator_dram.max));

  std::vector<double> k;
  std::vector<double> share;
  bool non_increasing = true;
  for (const auto &s : t2.steps) {
    if (!share.empty())
      non_increasing = non_increasing && s.estimator_dyn_pkg <= share.back();
    k.push_back(s.step_value);
    share.push_back(s.estimator_dyn_pkg);
  }
  out.push_back(flag("t2_estimator_pkg_non_increasing", non_increasing));
  out.push_back(band("t2_estimator_pkg_r2", k.size() >= 2 ? stats::linear_fit(k, share).r2 : 0.0, t.t2_r2_min, 1.0));

  const double target = t.t3_oracle_pkg;
  out.push_back(band("t3_oracle_pkg", t3.steps.at(0).oracle_pkg, target * (1.0 - t.t3_oracle_tolerance),
                     target * (1.0 + t.t3_oracle_tolerance)));
  const double ratio = t3.steps.at(1).estimator_dyn_pkg / t3.steps.at(0).estimator_dyn_pkg;
  out.push_back(band("t3_ratio", ratio, t.t3_ratio - t.t3_ratio_tolerance, t.t3_ratio + t.t3_ratio_tolerance));
  return out;
}

Result calibrate(const Targets &targets, const ScenarioConfig &base) {
  targets.validate();
  ScenarioConfig cfg = base;

  // Closed forms: stressor work/overhead, then k_cap at f_high.
  const auto wo =
      workloads::calibrate_work_overhead(targets.u_low, targets.u_high, targets.f_low, targets.f_high, targets.overhead);
  for (auto *spec : {&cfg.stressor_cpu, &cfg.stressor_memory}) {
    spec->cycles_per_request = numfmt::round6(wo.cycles_per_request);
    spec->overhead_per_request = numfmt::round6(wo.overhead);
  }
  const double k0 = solve_k_cap(cfg.socket.dvfs, cfg.stressor_cpu, targets.f_high, targets.t3_oracle_pkg);

  const auto beta_pkg = targets.beta_pkg.empty() ? steps(0.30, 0.90, 0.02) : targets.beta_pkg;
  const auto beta_dram = targets.beta_dram.empty() ? steps(0.05, 0.60, 0.01) : targets.beta_dram;
  const std::set<std::string> dram_bands{"t1_estimator_dram_min", "t1_estimator_dram_max"};

  // Stage 1: PKG knobs. DRAM estimator bands are left to stage 2.
  Result result;
  std::optional<Candidate> best;
  Candidate closest;
  std::size_t closest_failures = std::numeric_limits<std::size_t>::max();
  for (const auto &profile : targets.residency_profiles) {
    for (double s0 : targets.static_per_core_c0) {
      for (double scale : targets.k_cap_scale) {
        ScenarioConfig c = cfg;
        c.socket.cstates.idle_residency = profile;
        c.socket.static_per_core_c0 = s0;
        c.socket.dvfs.k_cap = numfmt::round6(k0 * scale);
        try {
          c.socket.validate();
        } catch (const Error &) {
          continue; // idle/full ratio outside the socket bounds
        }
        for (double beta : beta_pkg) {
          c.estimator.idle_underestimate_beta_pkg = beta;
          const auto probe = probe_config(c);
          const auto reports = run_probe(probe);
          ++result.candidates;
          auto bands = evaluate_bands(c, targets, reports);
          std::size_t failures = 0;
          for (const auto &b : bands)
            failures += (!b.ok && !dram_bands.contains(b.name)) ? 1 : 0;
          if (failures < closest_failures) {
            closest_failures = failures;
            closest = Candidate{c, bands, 0.0};
          }
          const auto &peak = *std::find_if(bands.begin(), bands.end(),
                                           [](const BandResult &b) { return b.name == "t1_peak_overestimation"; });
          if (failures == 0) {
            const double sc = score(targets, reports);
            if (!best || sc < best->score)
              best = Candidate{c, std::move(bands), sc};
          }
          // The pool, and with it the overestimation, shrinks as beta grows.
          if (peak.value < targets.t1_peak_overestimation.min)
            break;
        }
      }
    }
  }
  if (!best) {
    if (closest_failures == std::numeric_limits<std::size_t>::max())
      throw CalibrationError("no candidate in the search grid is a valid socket");
    std::vector<BandResult> pkg_bands;
    for (const auto &b : closest.bands)
      if (!dram_bands.contains(b.name))
        pkg_bands.push_back(b);
    throw CalibrationError("no candidate satisfies the PKG bands; closest violates:" + violated(pkg_bands));
  }

  // Stage 2: beta_dram, nearest to the middle of the estimator DRAM band.
  std::optional<Candidate> chosen;
  const double mid = (targets.t1_estimator_dram.min + targets.t1_estimator_dram.max) / 2.0;
  for (double beta : beta_dram) {
    ScenarioConfig c = best->cfg;
    c.estimator.idle_underestimate_beta_dram = beta;
    const auto reports = run_probe(probe_config(c));
    ++result.candidates;
    auto bands = evaluate_bands(c, targets, reports);
    if (!all_ok(bands))
      continue;
    double lo = 0.0;
    double hi = 0.0;
    for (const auto &b : bands) {
      if (b.name == "t1_estimator_dram_min")
        lo = b.value;
      if (b.name == "t1_estimator_dram_max")
        hi = b.value;
    }
    const double sc = std::abs((lo + hi) / 2.0 - mid);
    if (!chosen || sc < chosen->score)
      chosen = Candidate{c, std::move(bands), sc};
  }
  if (!chosen)
    throw CalibrationError("no beta_dram satisfies the estimator DRAM band");

  // Verify with the full protocol and the configured noise.
  const std::vector<TestReport> full{valframe::run_test1(chosen->cfg),
                                     valframe::run_test2(chosen->cfg, valframe::Test2Step::pkg),
                                     valframe::run_test3(chosen->cfg)};
  result.bands = evaluate_bands(chosen->cfg, targets, full);
  if (!all_ok(result.bands))
    throw CalibrationError("calibrated constants fail the full-protocol check:" + violated(result.bands));

  result.scenario = chosen->cfg;
  json achieved = json::object();
  for (const auto &b : result.bands)
    achieved[b.name] = json{{"value", numfmt::round6(b.value)}, {"min", b.min}, {"max", b.max}, {"ok", b.ok}};
  const auto &s = result.scenario;
  result.scenario.calibration = json{
      {"constants",
       {{"cycles_per_request", {{"value", s.stressor_cpu.cycles_per_request}, {"band", "utilization_at_f_high"}}},
        {"overhead_per_request", {{"value", s.stressor_cpu.overhead_per_request}, {"band", "utilization_at_f_high"}}},
        {"k_cap", {{"value", s.socket.dvfs.k_cap}, {"band", "t3_oracle_pkg"}}},
        {"static_per_core_c0", {{"value", s.socket.static_per_core_c0}, {"band", "t3_ratio"}}},
        {"idle_residency", {{"value", s.socket.cstates.idle_residency}, {"band", "cstate_savings_factor"}}},
        {"idle_underestimate_beta_pkg",
         {{"value", s.estimator.idle_underestimate_beta_pkg}, {"band", "t1_peak_overestimation"}}},
        {"idle_underestimate_beta_dram",
         {{"value", s.estimator.idle_underestimate_beta_dram}, {"band", "t1_estimator_dram"}}}}},
      {"achieved", achieved},
      {"candidates_evaluated", result.candidates},
      {"targets", to_json(targets)},
  };
  return result;
}

} // namespace powerbench::calibrate
