#include "powerbench/calibrate.hpp"
#include "powerbench/cli.hpp"

#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace powerbench;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string &name) {
  const auto dir = fs::temp_directory_path() / ("powerbench_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write(const fs::path &p, const nlohmann::json &j) { std::ofstream(p) << j.dump(2); }

fs::path default_scenario() { return fs::path(POWERBENCH_SOURCE_DIR) / "scenarios" / "default.json"; }

} // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(invoke({}).code == cli::kExitConfig);
  CHECK(invoke({"frobnicate"}).code == cli::kExitConfig);
  CHECK(invoke({"run", "/nonexistent/scenario.json"}).code == cli::kExitConfig);
  CHECK(invoke({"run", default_scenario().string(), "--tests", "t7"}).code == cli::kExitConfig);
  CHECK(invoke({"--help"}).code == cli::kExitOk);
}

TEST_CASE("invalid scenario exits 2") {
  const auto dir = scratch("invalid");
  auto j = nlohmann::json::parse(slurp(default_scenario()));
  j["unexpected"] = true;
  write(dir / "bad.json", j);
  const auto r = invoke({"run", (dir / "bad.json").string(), "--out", (dir / "out").string()});
  CHECK(r.code == cli::kExitConfig);
  CHECK(r.err.find("unexpected") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("runtime invariant breach exits 3") {
  const auto dir = scratch("invariant");
  auto j = nlohmann::json::parse(slurp(default_scenario()));
  j["noise"]["relative_sigma"] = 0.05; // baselines can no longer hold 1%
  write(dir / "noisy.json", j);
  const auto r = invoke({"run", (dir / "noisy.json").string(), "--tests", "t3", "--out", (dir / "out").string()});
  CHECK(r.code == cli::kExitInvariant);
  fs::remove_all(dir);
}

TEST_CASE("run is deterministic") {
  const auto dir = scratch("determinism");
  for (const char *sub : {"a", "b"}) {
    const auto r = invoke({"run", default_scenario().string(), "--tests", "t1", "--seed", "7", "--out",
                           (dir / sub).string()});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(r.out.find("t1: 9 steps") != std::string::npos);
  }
  for (const auto &e : fs::directory_iterator(dir / "a"))
    CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));
  const auto other = invoke({"run", default_scenario().string(), "--tests", "t1", "--seed", "8", "--out",
                             (dir / "c").string()});
  CHECK(slurp(dir / "c" / "t1.json") != slurp(dir / "a" / "t1.json"));
  fs::remove_all(dir);
}

TEST_CASE("run all writes five reports") {
  const auto dir = scratch("all");
  const auto r = invoke({"run", default_scenario().string(), "--tests", "all", "--out", dir.string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.at("tests").size() == 5);
  for (const auto &f : manifest.at("files"))
    CHECK(fs::exists(dir / f.get<std::string>()));
  CHECK(invoke({"report", dir.string()}).code == cli::kExitOk);
  fs::remove_all(dir);
}

TEST_CASE("list-scenarios") {
  const auto r = invoke({"list-scenarios", default_scenario().parent_path().string()});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("default.json") != std::string::npos);
  CHECK(r.out.find("targets.json") == std::string::npos);
}

TEST_CASE("forcing an exact idle estimate makes the targets infeasible") {
  const auto dir = scratch("infeasible");
  auto targets = calibrate::to_json(calibrate::Targets{});
  targets["search"]["beta_pkg"] = {1.0};
  targets["search"]["static_per_core_c0"] = {4.5};
  targets["search"]["k_cap_scale"] = {1.0};
  write(dir / "targets.json", targets);
  const auto r = invoke({"calibrate", (dir / "targets.json").string(), "--out", (dir / "s.json").string()});
  CHECK(r.code == cli::kExitCalibration);
  CHECK(r.err.find("t1_peak_overestimation") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "s.json"));
  fs::remove_all(dir);
}

TEST_CASE("calibrating the shipped targets reproduces the shipped scenario") {
  const auto dir = scratch("calibrate");
  const auto targets = fs::path(POWERBENCH_SOURCE_DIR) / "scenarios" / "targets.json";
  const auto r = invoke({"calibrate", targets.string(), "--out", (dir / "default.json").string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(slurp(dir / "default.json") == slurp(default_scenario()));
  const auto j = nlohmann::json::parse(slurp(dir / "default.json"));
  for (const auto &[name, band] : j.at("calibration").at("achieved").items())
    CHECK_MESSAGE(band.at("ok").get<bool>(), name);
  fs::remove_all(dir);
}
