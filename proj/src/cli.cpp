#include "powerbench/cli.hpp"

#include "powerbench/calibrate.hpp"
#include "powerbench/errors.hpp"
#include "powerbench/numfmt.hpp"
#include "powerbench/report.hpp"
#include "powerbench/scenario.hpp"
#include "powerbench/valframe.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace powerbench::cli {

namespace fs = std::filesystem;
using valframe::TestReport;

namespace {

std::vector<std::string> parse_tests(const std::string &list) {
  std::vector<std::string> wanted;
  std::stringstream ss(list);
  for (std::string id; std::getline(ss, id, ',');) {
    if (id == "all") {
      wanted.assign(std::begin(valframe::kTestIds), std::end(valframe::kTestIds));
      continue;
    }
    if (std::find(std::begin(valframe::kTestIds), std::end(valframe::kTestIds), id) == std::end(valframe::kTestIds))
      throw ConfigurationError("unknown test '" + id + "'");
    wanted.push_back(id);
  }
  if (wanted.empty())
    throw ConfigurationError("--tests selects nothing");
  // Declared order, no duplicates.
  std::vector<std::string> ordered;
  for (const char *id : valframe::kTestIds)
    if (std::find(wanted.begin(), wanted.end(), id) != wanted.end())
      ordered.emplace_back(id);
  return ordered;
}

std::string summary(const TestReport &r) {
  int pkg = 0;
  int dram = 0;
  int defined_pkg = 0;
  int defined_dram = 0;
  for (const auto &s : r.steps) {
    defined_pkg += s.pkg_verdict.defined ? 1 : 0;
    defined_dram += s.dram_verdict.defined ? 1 : 0;
    pkg += s.pkg_verdict.defined && s.pkg_verdict.pass ? 1 : 0;
    dram += s.dram_verdict.defined && s.dram_verdict.pass ? 1 : 0;
  }
  std::ostringstream os;
  os << r.test_id << ": " << r.steps.size() << " steps, " << r.estimator_mode << ", pkg within margin " << pkg << "/"
     << defined_pkg << ", dram within margin " << dram << "/" << defined_dram << ", "
     << (r.overall_pass ? "PASS" : "FAIL");
  return os.str();
}

int cmd_run(const std::string &scenario_path, const std::string &tests, std::optional<std::uint64_t> seed,
            const std::string &out_dir, std::ostream &out) {
  auto cfg = valframe::load_scenario(scenario_path);
  if (seed)
    cfg.noise.seed = *seed;
  const auto ids = parse_tests(tests);
  std::vector<TestReport> reports;
  for (const auto &id : ids) {
    reports.push_back(valframe::run_test(cfg, id));
    out << summary(reports.back()) << "\n";
  }
  const auto bundle = report::emit_bundle(valframe::scenario_hash(cfg), std::move(reports), out_dir);
  out << "wrote " << bundle.manifest.size() << " files to " << out_dir << "\n";
  return kExitOk;
}

int cmd_calibrate(const std::string &targets_path, const std::string &out_path, const std::string &base_path,
                  std::ostream &out) {
  const auto targets = calibrate::load_targets(targets_path);
  const auto base = base_path.empty() ? valframe::ScenarioConfig{} : valframe::load_scenario(base_path);
  const auto result = calibrate::calibrate(targets, base);
  for (const auto &b : result.bands)
    out << b.name << " = " << numfmt::str(b.value) << " in [" << numfmt::str(b.min) << ", " << numfmt::str(b.max)
        << "]\n";
  valframe::save_scenario(result.scenario, out_path);
  out << "calibrated " << result.candidates << " candidates; wrote " << out_path << "\n";
  return kExitOk;
}

int cmd_report(const std::string &dir, std::ostream &out) {
  const auto bundle = report::rerender(dir);
  for (const auto &r : bundle.reports)
    out << summary(r) << "\n";
  out << "re-rendered " << bundle.manifest.size() << " files in " << dir << "\n";
  return kExitOk;
}

int cmd_list(const std::string &dir, std::ostream &out) {
  if (!fs::is_directory(dir))
    throw ConfigurationError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto &f : files) {
    try {
      const auto cfg = valframe::load_scenario(f);
      out << f.filename().string() << "\t" << cfg.name << "\t" << valframe::scenario_hash(cfg) << "\n";
    } catch (const ConfigurationError &) {
      // Not a scenario (targets files live alongside).
    }
  }
  return kExitOk;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Container power attribution validation on a simulated node", "powerbench"};
  app.require_subcommand(1);

  std::string scenario;
  std::string tests = "all";
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  auto *run_cmd = app.add_subcommand("run", "Run validation tests and write reports");
  run_cmd->add_option("scenario", scenario, "Scenario JSON")->required();
  run_cmd->add_option("--tests", tests, "Comma-separated test ids or 'all'");
  run_cmd->add_option("--seed", seed, "Noise seed (overrides the scenario)");
  run_cmd->add_option("--out", out_dir, "Output directory");

  std::string targets;
  std::string cal_out;
  std::string base;
  auto *cal_cmd = app.add_subcommand("calibrate", "Solve model constants against target bands");
  cal_cmd->add_option("targets", targets, "Targets JSON")->required();
  cal_cmd->add_option("--out", cal_out, "Scenario file to write")->required();
  cal_cmd->add_option("--base", base, "Scenario whose non-calibrated fields are kept");

  std::string report_dir;
  auto *report_cmd = app.add_subcommand("report", "Re-render CSV, SVG and CV table from report JSON");
  report_cmd->add_option("dir", report_dir, "Report directory")->required();

  std::string list_dir = "scenarios";
  auto *list_cmd = app.add_subcommand("list-scenarios", "List scenario files in a directory");
  list_cmd->add_option("dir", list_dir, "Directory to scan");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*run_cmd)
      return cmd_run(scenario, tests, seed, out_dir, out);
    if (*cal_cmd)
      return cmd_calibrate(targets, cal_out, base, out);
    if (*report_cmd)
      return cmd_report(report_dir, out);
    return cmd_list(list_dir, out);
  } catch (const CalibrationError &e) {
    err << "calibration failed: " << e.what() << "\n";
    return kExitCalibration;
  } catch (const ConfigurationError &e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputDomainError &e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError &e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error &e) {
    err << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  }
}

} // namespace powerbench::cli
