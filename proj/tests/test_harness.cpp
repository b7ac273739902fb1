#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "smdnet/config.hpp"
#include "smdnet/harness.hpp"

using namespace smdnet;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("smdnet_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
  auto c = preset("localization-fig2");
  auto j = to_json(c);
  auto back = config_from_json(j);
  CHECK(back.scenario.n == 8);
  CHECK(back.scenario.topology.kind == "ring");
  CHECK(back.run.rounds == 1600);
  CHECK(config_hash(back) == config_hash(c));

  SECTION("unknown fields are rejected with a field path") {
    j["scenario"]["typo"] = 1;
    CHECK_THROWS_WITH(config_from_json(j), Catch::Matchers::ContainsSubstring("scenario.typo"));
  }

  SECTION("bad values are rejected") {
    Json bad = to_json(c);
    bad["run"]["rounds"] = -5;
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    Json bad2 = to_json(c);
    bad2["estimator"]["kind"] = "nonsense";
    CHECK_THROWS_AS(config_from_json(bad2), ConfigError);
  }

  SECTION("hash changes iff a semantic field changes") {
    auto c2 = c;
    c2.scenario.b = 2.0;
    CHECK(config_hash(c2) != config_hash(c));
    auto c3 = c;
    CHECK(config_hash(c3) == config_hash(c));
  }
}

TEST_CASE("preset names resolve") {
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset(name));
  CHECK_THROWS_AS(preset("fig9"), ConfigError);
}

TEST_CASE("csv writer emits the exact column contract") {
  auto dir = temp_dir("csv");
  RoundTrace trace;
  trace.rows.push_back({1, 0, 0.5, 0.25, 1.0});
  trace.rows.push_back({1, 1, 0.75, std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::quiet_NaN()});
  const auto path = (dir / "t.csv").string();
  write_csv(path, trace);
  const std::string text = slurp(path);
  CHECK(text.rfind("round,agent,error,consensus_tv,kl_ref\n", 0) == 0);
  CHECK(text.find("1,1,0.75,nan,nan\n") != std::string::npos);
}

TEST_CASE("single run writes trace, truth, and manifest") {
  auto dir = temp_dir("single");
  auto c = preset("localization-fig2");
  c.run.rounds = 20;
  c.run.metric_cadence = 5;
  c.run.out = dir.string();
  c.run.emit_plot = true;
  auto result = execute(c, 1);
  REQUIRE(result.runs.size() == 1);
  CHECK(fs::exists(result.runs[0].csv_path));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / (result.runs[0].tag + ".svg")));
  CHECK(fs::exists(dir / (result.runs[0].tag + "_truth.json")));

  // Row count contract: (rounds / cadence) * agents.
  const std::string text = slurp(result.runs[0].csv_path);
  int lines = -1;  // discount header
  for (char ch : text)
    if (ch == '\n') ++lines;
  CHECK(lines == (20 / 5) * 8);

  Json manifest = Json::parse(slurp((dir / "manifest.json").string()));
  CHECK(manifest["config_hash"] == config_hash(c));
  CHECK(manifest["library_version"] == kLibraryVersion);
}

TEST_CASE("rerunning a preset is byte identical") {
  auto c = preset("localization-fig2");
  c.run.rounds = 30;
  c.run.metric_cadence = 10;

  auto dir1 = temp_dir("det1");
  auto dir2 = temp_dir("det2");
  c.run.out = dir1.string();
  auto r1 = execute(c, 1);
  c.run.out = dir2.string();
  auto r2 = execute(c, 1);
  CHECK(slurp(r1.runs[0].csv_path) == slurp(r2.runs[0].csv_path));
}

TEST_CASE("sweep expansion and summary") {
  auto c = preset("localization-fig3-sweep");
  c.run.rounds = 10;
  c.run.metric_cadence = 5;
  c.sweep->b = {1.0, 10.0};
  c.sweep->topology_edges = {7, 27};
  c.sweep->estimators = {"distributed", "bp"};
  c.sweep->seeds = {3};

  auto entries = expand_sweep(c);
  CHECK(entries.size() == 8);

  auto dir = temp_dir("sweep");
  c.run.out = dir.string();
  auto result = execute(c, 2);
  CHECK(result.runs.size() == 8);
  CHECK(fs::exists(result.summary_path));
  const std::string summary = slurp(result.summary_path);
  CHECK(summary.rfind("scenario,topology,b,estimator,seed,rounds,final_error\n", 0) == 0);
  int lines = -1;
  for (char ch : summary)
    if (ch == '\n') ++lines;
  CHECK(lines == 8);
}

TEST_CASE("mapping preset runs end to end at reduced scale") {
  auto c = preset("mapping-desk");
  c.run.rounds = 300;
  c.run.metric_cadence = 100;
  c.scenario.train_per_robot = 500;
  c.scenario.verify_per_robot = 150;
  auto dir = temp_dir("mapping");
  c.run.out = dir.string();
  auto result = execute(c, 1);
  REQUIRE(result.runs.size() == 1);
  CHECK(result.runs[0].trace.rows.size() == 3u * 3u);
  CHECK(fs::exists(result.runs[0].csv_path));
}
