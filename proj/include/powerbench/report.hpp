#pragma once

// TestReport serialization: JSON, per-step series CSV, SVG charts, the CV
// summary table and the run manifest.

#include "powerbench/valframe.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace powerbench::report {

/// Every double goes through numfmt::round6, so emitted bytes are stable.
nlohmann::json to_json(const valframe::TestReport &r);
valframe::TestReport report_from_json(const nlohmann::json &j);

/// The report as it reads back from its JSON.
valframe::TestReport rounded(const valframe::TestReport &r);

/// Rows kept in both domains, one per load sample. The completed-pod check
/// lists its idle records instead.
void write_series_csv(std::ostream &os, const valframe::TestReport &r);

/// 800x500 chart: oracle vs. estimator per domain over the step variable.
std::string render_svg(const valframe::TestReport &r);

/// Writes <test>.json, <test>_series.csv and <test>.svg; returns the file
/// names relative to out_dir.
std::vector<std::string> emit_report(const valframe::TestReport &r, const std::filesystem::path &out_dir);

struct CvSummary {
  std::optional<double> min;
  std::optional<double> max;
  std::optional<double> avg;
};

struct CvRow {
  std::string test_id;
  CvSummary oracle_pkg;
  CvSummary oracle_dram;
  CvSummary estimator_pkg;
  CvSummary estimator_dram;
};

/// Per-step CV% summarised per test; undefined CVs are skipped.
std::vector<CvRow> cv_table(std::span<const valframe::TestReport> reports);

void write_cv_csv(std::ostream &os, std::span<const CvRow> rows);
void write_cv_text(std::ostream &os, std::span<const CvRow> rows);

/// Writes cv_table.csv and cv_table.txt; returns their names.
std::vector<std::string> emit_cv_table(std::span<const valframe::TestReport> reports,
                                       const std::filesystem::path &out_dir);

struct ReportBundle {
  std::string scenario_hash;
  std::vector<valframe::TestReport> reports;
  std::vector<CvRow> cv;
  std::vector<std::string> manifest;
};

/// Emits every report, the CV table and manifest.json.
ReportBundle emit_bundle(const std::string &scenario_hash, std::vector<valframe::TestReport> reports,
                         const std::filesystem::path &out_dir);

/// Reads manifest.json and the reports it lists, then rewrites the CSV, SVG
/// and CV files from the JSON.
ReportBundle rerender(const std::filesystem::path &dir);

} // namespace powerbench::report
