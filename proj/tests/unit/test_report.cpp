#include "powerbench/report.hpp"
#include "powerbench/valframe.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace powerbench;
using namespace powerbench::valframe;

namespace {

ScenarioConfig quick() {
  ScenarioConfig cfg;
  cfg.timing.settle_s = 5;
  // Long enough that the 10% trim cap cannot trip on noise.
  cfg.timing.baseline_s = 60;
  cfg.timing.request_count = 50;
  return cfg;
}

const TestReport &t1() {
  static const TestReport r = run_test1(quick());
  return r;
}

std::size_t count(const std::string &hay, const std::string &needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1))
    ++n;
  return n;
}

} // namespace

TEST_CASE("json round trip") {
  const auto j = report::to_json(t1());
  const auto back = report::report_from_json(j);
  CHECK(report::to_json(back) == j);
  CHECK(back == report::rounded(t1()));
  CHECK(report::rounded(back) == back);
  CHECK(j.at("report_version") == kReportVersion);
}

TEST_CASE("series csv has one row per kept sample") {
  std::ostringstream os;
  report::write_series_csv(os, t1());
  std::size_t expected = 0;
  for (const auto &s : t1().steps)
    for (const auto &p : s.samples)
      expected += (p.kept_pkg && p.kept_dram) ? 1 : 0;
  const std::string text = os.str();
  CHECK(text.rfind("step,label,t,pkg_w,dram_w,oracle_pkg_w,oracle_dram_w\n", 0) == 0);
  CHECK(count(text, "\n") == expected + 1);
}

TEST_CASE("svg structure") {
  const auto svg = report::render_svg(t1());
  CHECK(svg.find("viewBox=\"0 0 800 500\"") != std::string::npos);
  CHECK(count(svg, "class=\"oracle-pkg\"") == 1);
  CHECK(count(svg, "class=\"estimator-pkg\"") == 1);
  CHECK(count(svg, "class=\"oracle-dram\"") == 1);
  CHECK(count(svg, "class=\"estimator-dram\"") == 1);
  CHECK(svg.find(">1.0 GHz<") != std::string::npos);
  CHECK(svg.find(">2.6 GHz<") != std::string::npos);
}

TEST_CASE("cv table") {
  const std::vector<TestReport> one{run_test3(quick())};
  auto single = one;
  single[0].steps.resize(1);
  const auto rows = report::cv_table(single);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].oracle_pkg.min == rows[0].oracle_pkg.max);
  CHECK(rows[0].oracle_pkg.min == rows[0].oracle_pkg.avg);

  std::ostringstream csv;
  report::write_cv_csv(csv, report::cv_table(one));
  CHECK(count(csv.str(), "\n") == 2);
}

TEST_CASE("bundle and re-render") {
  const auto dir = std::filesystem::temp_directory_path() / "powerbench_report_test";
  std::filesystem::remove_all(dir);
  const auto bundle = report::emit_bundle("abc", {t1()}, dir);
  CHECK(bundle.manifest.size() == 6);
  for (const auto &f : bundle.manifest)
    CHECK(std::filesystem::exists(dir / f));

  auto slurp = [](const std::filesystem::path &p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto svg = slurp(dir / "t1.svg");
  std::filesystem::remove(dir / "t1.svg");
  const auto again = report::rerender(dir);
  CHECK(again.reports.size() == 1);
  CHECK(slurp(dir / "t1.svg") == svg);
  std::filesystem::remove_all(dir);
}
