#include "powerbench/report.hpp"

#include "powerbench/errors.hpp"
#include "powerbench/numfmt.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace powerbench::report {

using nlohmann::json;
using valframe::TestReport;

namespace {

double r6(double v) { return numfmt::round6(v); }

json round_numbers(const json &j) {
  if (j.is_number_float())
    return r6(j.get<double>());
  if (j.is_array() || j.is_object()) {
    json out = j;
    for (auto &v : out)
      v = round_numbers(v);
    return out;
  }
  return j;
}

json baseline_json(const valframe::BaselineStats &b) {
  return json{{"duration_s", b.duration},
              {"mean_pkg", r6(b.mean_pkg)},
              {"mean_dram", r6(b.mean_dram)},
              {"sigma_pkg", r6(b.sigma_pkg)},
              {"sigma_dram", r6(b.sigma_dram)}};
}

valframe::BaselineStats baseline_from(const json &j) {
  return valframe::BaselineStats{.duration = j.at("duration_s").get<int>(),
                                 .mean_pkg = j.at("mean_pkg").get<double>(),
                                 .mean_dram = j.at("mean_dram").get<double>(),
                                 .sigma_pkg = j.at("sigma_pkg").get<double>(),
                                 .sigma_dram = j.at("sigma_dram").get<double>()};
}

json stability_json(const valframe::StabilityStats &s) {
  return json{{"defined", s.defined}, {"mu", r6(s.mu)}, {"sigma", r6(s.sigma)}, {"cv_percent", r6(s.cv_percent)}};
}

valframe::StabilityStats stability_from(const json &j) {
  return valframe::StabilityStats{.defined = j.at("defined").get<bool>(),
                                  .mu = j.at("mu").get<double>(),
                                  .sigma = j.at("sigma").get<double>(),
                                  .cv_percent = j.at("cv_percent").get<double>()};
}

json verdict_json(const valframe::ComparisonVerdict &v) {
  return json{{"defined", v.defined},
              {"estimated", r6(v.estimated)},
              {"reference", r6(v.reference)},
              {"deviation_fraction", r6(v.deviation_fraction)},
              {"pass", v.pass}};
}

valframe::ComparisonVerdict verdict_from(const json &j) {
  return valframe::ComparisonVerdict{.defined = j.at("defined").get<bool>(),
                                     .estimated = j.at("estimated").get<double>(),
                                     .reference = j.at("reference").get<double>(),
                                     .deviation_fraction = j.at("deviation_fraction").get<double>(),
                                     .pass = j.at("pass").get<bool>()};
}

json step_json(const valframe::StepReport &s) {
  json samples = json::array();
  for (const auto &p : s.samples)
    samples.push_back(json{{"t", p.t},
                           {"pkg", r6(p.pkg)},
                           {"dram", r6(p.dram)},
                           {"oracle_pkg", r6(p.oracle_pkg)},
                           {"oracle_dram", r6(p.oracle_dram)},
                           {"kept_pkg", p.kept_pkg},
                           {"kept_dram", p.kept_dram}});
  json windows = json::array();
  for (const auto &w : s.windows)
    windows.push_back(json{{"t_start", w.t_start},
                           {"idle_pkg", r6(w.idle_pkg)},
                           {"dyn_pkg", r6(w.dyn_pkg)},
                           {"idle_dram", r6(w.idle_dram)},
                           {"dyn_dram", r6(w.dyn_dram)},
                           {"node_dyn_pkg", r6(w.node_dyn_pkg)},
                           {"node_dyn_dram", r6(w.node_dyn_dram)},
                           {"entries_dyn_dram", r6(w.entries_dyn_dram)}});
  json idle = json::array();
  for (const auto &r : s.idle_records)
    idle.push_back(json{{"t_start", r.t_start},
                        {"id", r.id},
                        {"active", r.active},
                        {"idle_pkg", r6(r.idle_pkg)},
                        {"idle_dram", r6(r.idle_dram)},
                        {"node_idle_pkg", r6(r.node_idle_pkg)},
                        {"node_idle_dram", r6(r.node_idle_dram)}});
  return json{
      {"label", s.label},
      {"step_value", r6(s.step_value)},
      {"baseline", baseline_json(s.baseline)},
      {"oracle_pkg", r6(s.oracle_pkg)},
      {"oracle_dram", r6(s.oracle_dram)},
      {"reference_pkg", r6(s.reference_pkg)},
      {"reference_dram", r6(s.reference_dram)},
      {"estimator_idle_pkg", r6(s.estimator_idle_pkg)},
      {"estimator_dyn_pkg", r6(s.estimator_dyn_pkg)},
      {"estimator_idle_dram", r6(s.estimator_idle_dram)},
      {"estimator_dyn_dram", r6(s.estimator_dyn_dram)},
      {"estimator_entries_dyn_dram", r6(s.estimator_entries_dyn_dram)},
      {"socket_pkg", r6(s.socket_pkg)},
      {"socket_dram", r6(s.socket_dram)},
      {"host_bandwidth_fraction", r6(s.host_bandwidth_fraction)},
      {"oracle_pkg_stability", stability_json(s.oracle_pkg_stability)},
      {"oracle_dram_stability", stability_json(s.oracle_dram_stability)},
      {"estimator_pkg_stability", stability_json(s.estimator_pkg_stability)},
      {"estimator_dram_stability", stability_json(s.estimator_dram_stability)},
      {"pkg_verdict", verdict_json(s.pkg_verdict)},
      {"dram_verdict", verdict_json(s.dram_verdict)},
      {"samples", samples},
      {"windows", windows},
      {"idle_records", idle},
  };
}

valframe::StepReport step_from(const json &j) {
  valframe::StepReport s;
  s.label = j.at("label").get<std::string>();
  s.step_value = j.at("step_value").get<double>();
  s.baseline = baseline_from(j.at("baseline"));
  s.oracle_pkg = j.at("oracle_pkg").get<double>();
  s.oracle_dram = j.at("oracle_dram").get<double>();
  s.reference_pkg = j.at("reference_pkg").get<double>();
  s.reference_dram = j.at("reference_dram").get<double>();
  s.estimator_idle_pkg = j.at("estimator_idle_pkg").get<double>();
  s.estimator_dyn_pkg = j.at("estimator_dyn_pkg").get<double>();
  s.estimator_idle_dram = j.at("estimator_idle_dram").get<double>();
  s.estimator_dyn_dram = j.at("estimator_dyn_dram").get<double>();
  s.estimator_entries_dyn_dram = j.at("estimator_entries_dyn_dram").get<double>();
  s.socket_pkg = j.at("socket_pkg").get<double>();
  s.socket_dram = j.at("socket_dram").get<double>();
  s.host_bandwidth_fraction = j.at("host_bandwidth_fraction").get<double>();
  s.oracle_pkg_stability = stability_from(j.at("oracle_pkg_stability"));
  s.oracle_dram_stability = stability_from(j.at("oracle_dram_stability"));
  s.estimator_pkg_stability = stability_from(j.at("estimator_pkg_stability"));
  s.estimator_dram_stability = stability_from(j.at("estimator_dram_stability"));
  s.pkg_verdict = verdict_from(j.at("pkg_verdict"));
  s.dram_verdict = verdict_from(j.at("dram_verdict"));
  for (const auto &p : j.at("samples"))
    s.samples.push_back(valframe::SamplePoint{.t = p.at("t").get<std::int64_t>(),
                                              .pkg = p.at("pkg").get<double>(),
                                              .dram = p.at("dram").get<double>(),
                                              .oracle_pkg = p.at("oracle_pkg").get<double>(),
                                              .oracle_dram = p.at("oracle_dram").get<double>(),
                                              .kept_pkg = p.at("kept_pkg").get<bool>(),
                                              .kept_dram = p.at("kept_dram").get<bool>()});
  for (const auto &w : j.at("windows"))
    s.windows.push_back(valframe::WindowPoint{.t_start = w.at("t_start").get<std::int64_t>(),
                                              .idle_pkg = w.at("idle_pkg").get<double>(),
                                              .dyn_pkg = w.at("dyn_pkg").get<double>(),
                                              .idle_dram = w.at("idle_dram").get<double>(),
                                              .dyn_dram = w.at("dyn_dram").get<double>(),
                                              .node_dyn_pkg = w.at("node_dyn_pkg").get<double>(),
                                              .node_dyn_dram = w.at("node_dyn_dram").get<double>(),
                                              .entries_dyn_dram = w.at("entries_dyn_dram").get<double>()});
  for (const auto &r : j.at("idle_records"))
    s.idle_records.push_back(valframe::IdleRecord{.t_start = r.at("t_start").get<std::int64_t>(),
                                                  .id = r.at("id").get<std::string>(),
                                                  .active = r.at("active").get<bool>(),
                                                  .idle_pkg = r.at("idle_pkg").get<double>(),
                                                  .idle_dram = r.at("idle_dram").get<double>(),
                                                  .node_idle_pkg = r.at("node_idle_pkg").get<double>(),
                                                  .node_idle_dram = r.at("node_idle_dram").get<double>()});
  return s;
}

void write_file(const std::filesystem::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << content;
  if (!out)
    throw IoError("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

std::string xml_escape(const std::string &s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '<':
      out += "&lt;";
      break;
    case '>':
      out += "&gt;";
      break;
    case '&':
      out += "&amp;";
      break;
    case '"':
      out += "&quot;";
      break;
    default:
      out += c;
    }
  }
  return out;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Series {
  std::string name;
  std::string css;
  std::string color;
  std::vector<double> values;
};

constexpr double kWidth = 800.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;

/// One panel of line series over the step labels.
void line_panel(std::ostringstream &svg, double top, double height, const std::string &title,
                const std::vector<std::string> &ticks, const std::vector<Series> &series) {
  const double x0 = kLeft;
  const double x1 = kWidth - kRight;
  const double y0 = top + height;
  double ymax = 0.0;
  for (const auto &s : series)
    for (double v : s.values)
      ymax = std::max(ymax, v);
  ymax = ymax > 0.0 ? ymax * 1.1 : 1.0;
  const std::size_t n = ticks.size();
  auto x_at = [&](std::size_t i) { return n <= 1 ? (x0 + x1) / 2.0 : x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(n - 1); };
  auto y_at = [&](double v) { return y0 - height * v / ymax; };

  svg << "<g class=\"panel\">\n";
  svg << "<text x=\"" << coord(x0) << "\" y=\"" << coord(top - 8) << "\" font-size=\"14\">" << xml_escape(title)
      << "</text>\n";
  svg << "<line class=\"axis\" x1=\"" << coord(x0) << "\" y1=\"" << coord(y0) << "\" x2=\"" << coord(x1) << "\" y2=\""
      << coord(y0) << "\" stroke=\"#000\"/>\n";
  svg << "<line class=\"axis\" x1=\"" << coord(x0) << "\" y1=\"" << coord(top) << "\" x2=\"" << coord(x0)
      << "\" y2=\"" << coord(y0) << "\" stroke=\"#000\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0;
    svg << "<text class=\"ytick\" x=\"" << coord(x0 - 6) << "\" y=\"" << coord(y_at(v) + 4)
        << "\" font-size=\"10\" text-anchor=\"end\">" << numfmt::str(numfmt::round6(v)) << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i)
    svg << "<text class=\"xtick\" x=\"" << coord(x_at(i)) << "\" y=\"" << coord(y0 + 14)
        << "\" font-size=\"10\" text-anchor=\"middle\">" << xml_escape(ticks[i]) << "</text>\n";
  double legend_y = top + 10;
  for (const auto &s : series) {
    svg << "<polyline class=\"" << s.css << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.values.size(); ++i)
      svg << (i ? " " : "") << coord(x_at(i)) << ',' << coord(y_at(s.values[i]));
    svg << "\"/>\n";
    for (std::size_t i = 0; i < s.values.size(); ++i)
      svg << "<circle cx=\"" << coord(x_at(i)) << "\" cy=\"" << coord(y_at(s.values[i])) << "\" r=\"3\" fill=\""
          << s.color << "\"/>\n";
    svg << "<text x=\"" << coord(x1 + 12) << "\" y=\"" << coord(legend_y) << "\" font-size=\"11\" fill=\"" << s.color
        << "\">" << xml_escape(s.name) << "</text>\n";
    legend_y += 16;
  }
  svg << "</g>\n";
}

/// Bar panel used by the completed-pod check.
void bar_panel(std::ostringstream &svg, double top, double height, const std::string &title,
               const std::vector<std::string> &names, const std::vector<double> &values) {
  const double x0 = kLeft;
  const double x1 = kWidth - 20.0;
  const double y0 = top + height;
  double ymax = 0.0;
  for (double v : values)
    ymax = std::max(ymax, v);
  ymax = ymax > 0.0 ? ymax * 1.1 : 1.0;
  const double slot = names.empty() ? 0.0 : (x1 - x0) / static_cast<double>(names.size());
  svg << "<g class=\"panel\">\n";
  svg << "<text x=\"" << coord(x0) << "\" y=\"" << coord(top - 8) << "\" font-size=\"14\">" << xml_escape(title)
      << "</text>\n";
  svg << "<line class=\"axis\" x1=\"" << coord(x0) << "\" y1=\"" << coord(y0) << "\" x2=\"" << coord(x1) << "\" y2=\""
      << coord(y0) << "\" stroke=\"#000\"/>\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double h = height * values[i] / ymax;
    svg << "<rect class=\"bar\" x=\"" << coord(x0 + slot * static_cast<double>(i) + slot * 0.15) << "\" y=\""
        << coord(y0 - h) << "\" width=\"" << coord(slot * 0.7) << "\" height=\"" << coord(h)
        << "\" fill=\"#4878a8\"/>\n";
    svg << "<text class=\"xtick\" x=\"" << coord(x0 + slot * (static_cast<double>(i) + 0.5)) << "\" y=\""
        << coord(y0 + 12) << "\" font-size=\"8\" text-anchor=\"middle\">" << xml_escape(names[i]) << "</text>\n";
  }
  svg << "</g>\n";
}

std::string summary_cell(const std::optional<double> &v) { return v ? numfmt::str(*v) : "n/a"; }

CvSummary summarize(const std::vector<double> &cvs) {
  CvSummary s;
  if (cvs.empty())
    return s;
  s.min = *std::min_element(cvs.begin(), cvs.end());
  s.max = *std::max_element(cvs.begin(), cvs.end());
  double sum = 0.0;
  for (double v : cvs)
    sum += v;
  s.avg = sum / static_cast<double>(cvs.size());
  return s;
}

} // namespace

json to_json(const TestReport &r) {
  json steps = json::array();
  for (const auto &s : r.steps)
    steps.push_back(step_json(s));
  return json{
      {"report_version", r.report_version},
      {"test_id", r.test_id},
      {"step_variable", r.step_variable},
      {"estimator_mode", r.estimator_mode},
      {"seed", r.seed},
      {"overall_pass", r.overall_pass},
      {"calibration", round_numbers(r.calibration)},
      {"steps", steps},
  };
}

TestReport report_from_json(const json &j) {
  try {
    TestReport r;
    r.report_version = j.at("report_version").get<int>();
    if (r.report_version != valframe::kReportVersion)
      throw ConfigurationError("unsupported report_version " + std::to_string(r.report_version));
    r.test_id = j.at("test_id").get<std::string>();
    r.step_variable = j.at("step_variable").get<std::string>();
    r.estimator_mode = j.at("estimator_mode").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.overall_pass = j.at("overall_pass").get<bool>();
    r.calibration = j.at("calibration");
    for (const auto &s : j.at("steps"))
      r.steps.push_back(step_from(s));
    return r;
  } catch (const json::exception &e) {
    throw ConfigurationError(std::string("report: ") + e.what());
  }
}

TestReport rounded(const TestReport &r) { return report_from_json(to_json(r)); }

void write_series_csv(std::ostream &os, const TestReport &r) {
  const bool idle_check = std::all_of(r.steps.begin(), r.steps.end(), [](const auto &s) { return s.samples.empty(); }) &&
                          std::any_of(r.steps.begin(), r.steps.end(), [](const auto &s) { return !s.idle_records.empty(); });
  if (idle_check) {
    os << "t_start,entry,active,idle_pkg_w,idle_dram_w,node_idle_pkg_w,node_idle_dram_w\n";
    for (const auto &s : r.steps)
      for (const auto &rec : s.idle_records)
        os << rec.t_start << ',' << rec.id << ',' << (rec.active ? 1 : 0) << ',' << numfmt::str(rec.idle_pkg) << ','
           << numfmt::str(rec.idle_dram) << ',' << numfmt::str(rec.node_idle_pkg) << ','
           << numfmt::str(rec.node_idle_dram) << '\n';
    return;
  }
  os << "step,label,t,pkg_w,dram_w,oracle_pkg_w,oracle_dram_w\n";
  for (std::size_t i = 0; i < r.steps.size(); ++i)
    for (const auto &p : r.steps[i].samples)
      if (p.kept_pkg && p.kept_dram)
        os << i << ',' << r.steps[i].label << ',' << p.t << ',' << numfmt::str(p.pkg) << ',' << numfmt::str(p.dram)
           << ',' << numfmt::str(p.oracle_pkg) << ',' << numfmt::str(p.oracle_dram) << '\n';
}

std::string render_svg(const TestReport &r) {
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
  svg << "<rect width=\"800\" height=\"500\" fill=\"#fff\"/>\n";
  svg << "<text x=\"400\" y=\"18\" font-size=\"15\" text-anchor=\"middle\">" << xml_escape(r.test_id) << " ("
      << xml_escape(r.estimator_mode) << ") vs. " << xml_escape(r.step_variable) << "</text>\n";

  const bool has_samples =
      std::any_of(r.steps.begin(), r.steps.end(), [](const auto &s) { return !s.samples.empty(); });
  if (!has_samples && !r.steps.empty()) {
    // Completed-pod check: idle attribution per entry in the first window.
    std::vector<std::string> names;
    std::vector<double> pkg;
    std::vector<double> dram;
    const auto &records = r.steps.front().idle_records;
    for (const auto &rec : records) {
      if (rec.t_start != records.front().t_start)
        break;
      names.push_back(rec.id);
      pkg.push_back(rec.idle_pkg);
      dram.push_back(rec.idle_dram);
    }
    bar_panel(svg, 50, 180, "PKG idle attribution (W)", names, pkg);
    bar_panel(svg, 290, 180, "DRAM idle attribution (W)", names, dram);
  } else {
    std::vector<std::string> ticks;
    for (const auto &s : r.steps)
      ticks.push_back(s.label);
    Series o_pkg{"oracle", "oracle-pkg", "#1b7837", {}};
    Series e_pkg{"estimator", "estimator-pkg", "#c0392b", {}};
    Series o_dram{"oracle", "oracle-dram", "#1b7837", {}};
    Series e_dram{"estimator", "estimator-dram", "#c0392b", {}};
    for (const auto &s : r.steps) {
      o_pkg.values.push_back(s.oracle_pkg);
      e_pkg.values.push_back(s.estimator_dyn_pkg);
      o_dram.values.push_back(s.oracle_dram);
      e_dram.values.push_back(s.estimator_dyn_dram);
    }
    line_panel(svg, 50, 180, "PKG container dynamic power (W)", ticks, {o_pkg, e_pkg});
    line_panel(svg, 290, 180, "DRAM container dynamic power (W)", ticks, {o_dram, e_dram});
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::string> emit_report(const TestReport &report, const std::filesystem::path &out_dir) {
  ensure_dir(out_dir);
  // Render from what the JSON holds so `report <dir>` reproduces every byte.
  const TestReport r = rounded(report);
  const std::string json_name = r.test_id + ".json";
  const std::string csv_name = r.test_id + "_series.csv";
  const std::string svg_name = r.test_id + ".svg";
  write_file(out_dir / json_name, to_json(r).dump(2) + "\n");
  std::ostringstream csv;
  write_series_csv(csv, r);
  write_file(out_dir / csv_name, csv.str());
  write_file(out_dir / svg_name, render_svg(r));
  return {json_name, csv_name, svg_name};
}

std::vector<CvRow> cv_table(std::span<const TestReport> reports) {
  std::vector<CvRow> rows;
  for (const auto &r : reports) {
    std::vector<double> op, od, ep, ed;
    for (const auto &s : r.steps) {
      if (s.oracle_pkg_stability.defined)
        op.push_back(s.oracle_pkg_stability.cv_percent);
      if (s.oracle_dram_stability.defined)
        od.push_back(s.oracle_dram_stability.cv_percent);
      if (s.estimator_pkg_stability.defined)
        ep.push_back(s.estimator_pkg_stability.cv_percent);
      if (s.estimator_dram_stability.defined)
        ed.push_back(s.estimator_dram_stability.cv_percent);
    }
    rows.push_back(CvRow{.test_id = r.test_id,
                         .oracle_pkg = summarize(op),
                         .oracle_dram = summarize(od),
                         .estimator_pkg = summarize(ep),
                         .estimator_dram = summarize(ed)});
  }
  return rows;
}

void write_cv_csv(std::ostream &os, std::span<const CvRow> rows) {
  os << "test";
  for (const char *series : {"oracle_pkg", "oracle_dram", "estimator_pkg", "estimator_dram"})
    for (const char *stat : {"min", "max", "avg"})
      os << ',' << series << '_' << stat;
  os << '\n';
  for (const auto &row : rows) {
    os << row.test_id;
    for (const auto *s : {&row.oracle_pkg, &row.oracle_dram, &row.estimator_pkg, &row.estimator_dram})
      os << ',' << summary_cell(s->min) << ',' << summary_cell(s->max) << ',' << summary_cell(s->avg);
    os << '\n';
  }
}

void write_cv_text(std::ostream &os, std::span<const CvRow> rows) {
  auto cell = [](const CvSummary &s) {
    return summary_cell(s.min) + " / " + summary_cell(s.max) + " / " + summary_cell(s.avg);
  };
  std::vector<std::array<std::string, 5>> table{{"test", "oracle pkg", "oracle dram", "estimator pkg", "estimator dram"}};
  for (const auto &row : rows)
    table.push_back({row.test_id, cell(row.oracle_pkg), cell(row.oracle_dram), cell(row.estimator_pkg),
                     cell(row.estimator_dram)});
  std::array<std::size_t, 5> width{};
  for (const auto &line : table)
    for (std::size_t c = 0; c < line.size(); ++c)
      width[c] = std::max(width[c], line[c].size());
  os << "CV% per test (min / max / avg over steps)\n";
  for (const auto &line : table) {
    std::string text;
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c > 0)
        text += " | ";
      text += line[c] + std::string(width[c] - line[c].size(), ' ');
    }
    while (!text.empty() && text.back() == ' ')
      text.pop_back();
    os << text << "\n";
  }
}

std::vector<std::string> emit_cv_table(std::span<const TestReport> reports, const std::filesystem::path &out_dir) {
  ensure_dir(out_dir);
  const auto rows = cv_table(reports);
  std::ostringstream csv;
  write_cv_csv(csv, rows);
  write_file(out_dir / "cv_table.csv", csv.str());
  std::ostringstream txt;
  write_cv_text(txt, rows);
  write_file(out_dir / "cv_table.txt", txt.str());
  return {"cv_table.csv", "cv_table.txt"};
}

ReportBundle emit_bundle(const std::string &scenario_hash, std::vector<TestReport> reports,
                         const std::filesystem::path &out_dir) {
  ReportBundle b;
  b.scenario_hash = scenario_hash;
  b.reports = std::move(reports);
  for (auto &r : b.reports)
    r = rounded(r);
  for (const auto &r : b.reports)
    for (auto &name : emit_report(r, out_dir))
      b.manifest.push_back(std::move(name));
  for (auto &name : emit_cv_table(b.reports, out_dir))
    b.manifest.push_back(std::move(name));
  b.cv = cv_table(b.reports);

  json tests = json::array();
  for (const auto &r : b.reports)
    tests.push_back(r.test_id);
  const json manifest{{"report_version", valframe::kReportVersion},
                      {"scenario_hash", scenario_hash},
                      {"tests", tests},
                      {"files", b.manifest}};
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  b.manifest.push_back("manifest.json");
  return b;
}

ReportBundle rerender(const std::filesystem::path &dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception &e) {
    throw ConfigurationError((dir / "manifest.json").string() + ": " + e.what());
  }
  std::vector<TestReport> reports;
  try {
    for (const auto &id : manifest.at("tests")) {
      const auto path = dir / (id.get<std::string>() + ".json");
      json j;
      try {
        j = json::parse(read_file(path));
      } catch (const json::exception &e) {
        throw ConfigurationError(path.string() + ": " + e.what());
      }
      reports.push_back(report_from_json(j));
    }
    return emit_bundle(manifest.at("scenario_hash").get<std::string>(), std::move(reports), dir);
  } catch (const json::exception &e) {
    throw ConfigurationError((dir / "manifest.json").string() + ": " + e.what());
  }
}

} // namespace powerbench::report
