#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smdnet/errors.hpp"
#include "smdnet/runner.hpp"
#include "smdnet/scenarios.hpp"
#include "smdnet/schedule.hpp"

namespace smdnet {

using Json = nlohmann::json;

constexpr int kConfigVersion = 1;
constexpr const char* kLibraryVersion = "0.1.0";

struct ScenarioConfig {
  std::string kind = "localization";  // localization | mapping
  std::uint64_t seed = 0;
  // localization
  int n = 8;
  TopologySpec topology;
  double b = 1.0;
  double obs_fraction = 1.0;
  // mapping
  int robots = 3;
  int centers = 60;
  double threshold = 20.0;
  int train_per_robot = 4000;
  int verify_per_robot = 600;

  std::string label() const {
    if (kind == "mapping")
      return "mapping-r" + std::to_string(robots) + "-c" + std::to_string(centers);
    return "localization-" + topology.label() + "-b" + [this] {
      std::string s = std::to_string(b);
      s.erase(s.find_last_not_of('0') + 1);
      if (!s.empty() && s.back() == '.') s.pop_back();
      return s;
    }();
  }
};

struct EstimatorConfig {
  std::string kind = "distributed";
  std::string schedule = "const:1";
  double circular_alpha = 0.8;
};

struct RunConfig {
  int rounds = 500;
  int metric_cadence = 1;
  std::string out = "out";
  bool emit_plot = false;
  bool track_reference = true;
};

struct SweepConfig {
  std::vector<double> b;
  std::vector<int> topology_edges;
  std::vector<std::string> estimators;
  std::vector<std::uint64_t> seeds;

  bool empty() const { return b.empty() && topology_edges.empty() && estimators.empty(); }
};

struct ExperimentConfig {
  int version = kConfigVersion;
  ScenarioConfig scenario;
  EstimatorConfig estimator;
  RunConfig run;
  std::optional<SweepConfig> sweep;
};

namespace config_detail {

inline void reject_unknown(const Json& j, const std::vector<std::string>& known,
                           const std::string& path) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const auto& k : known)
      if (k == key) ok = true;
    if (!ok) throw ConfigError("unknown field '" + path + key + "'");
  }
}

template <typename T>
T get_or(const Json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("field '" + key + "' has the wrong type");
  }
}

}  // namespace config_detail

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["version"] = c.version;
  j["scenario"] = {{"kind", c.scenario.kind}, {"seed", c.scenario.seed}};
  if (c.scenario.kind == "localization") {
    j["scenario"]["n"] = c.scenario.n;
    j["scenario"]["topology"] = {{"kind", c.scenario.topology.kind}};
    if (c.scenario.topology.kind == "interpolated")
      j["scenario"]["topology"]["edges"] = c.scenario.topology.edges;
    if (c.scenario.topology.kind == "erdos-renyi")
      j["scenario"]["topology"]["p"] = c.scenario.topology.er_prob;
    j["scenario"]["b"] = c.scenario.b;
    if (c.scenario.obs_fraction != 1.0) j["scenario"]["obs_fraction"] = c.scenario.obs_fraction;
  } else {
    j["scenario"]["robots"] = c.scenario.robots;
    j["scenario"]["centers"] = c.scenario.centers;
    j["scenario"]["threshold"] = c.scenario.threshold;
    j["scenario"]["train_per_robot"] = c.scenario.train_per_robot;
    j["scenario"]["verify_per_robot"] = c.scenario.verify_per_robot;
  }
  j["estimator"] = {{"kind", c.estimator.kind}, {"schedule", c.estimator.schedule}};
  if (c.estimator.kind == "circular-bp") j["estimator"]["alpha"] = c.estimator.circular_alpha;
  j["run"] = {{"rounds", c.run.rounds},
              {"metric_cadence", c.run.metric_cadence},
              {"out", c.run.out},
              {"emit_plot", c.run.emit_plot},
              {"track_reference", c.run.track_reference}};
  if (c.sweep) {
    j["sweep"] = Json::object();
    if (!c.sweep->b.empty()) j["sweep"]["b"] = c.sweep->b;
    if (!c.sweep->topology_edges.empty()) j["sweep"]["topology_edges"] = c.sweep->topology_edges;
    if (!c.sweep->estimators.empty()) j["sweep"]["estimators"] = c.sweep->estimators;
    if (!c.sweep->seeds.empty()) j["sweep"]["seeds"] = c.sweep->seeds;
  }
  return j;
}

inline ExperimentConfig config_from_json(const Json& j) {
  using config_detail::get_or;
  using config_detail::reject_unknown;
  reject_unknown(j, {"version", "scenario", "estimator", "run", "sweep"}, "");
  ExperimentConfig c;
  c.version = get_or(j, "version", kConfigVersion);
  if (c.version != kConfigVersion)
    throw ConfigError("unsupported config version " + std::to_string(c.version));

  if (j.contains("scenario")) {
    const Json& s = j.at("scenario");
    reject_unknown(s,
                   {"kind", "seed", "n", "topology", "b", "obs_fraction", "robots", "centers",
                    "threshold", "train_per_robot", "verify_per_robot"},
                   "scenario.");
    c.scenario.kind = get_or<std::string>(s, "kind", "localization");
    if (c.scenario.kind != "localization" && c.scenario.kind != "mapping")
      throw ConfigError("scenario.kind must be 'localization' or 'mapping'");
    c.scenario.seed = get_or<std::uint64_t>(s, "seed", 0);
    c.scenario.n = get_or(s, "n", 8);
    c.scenario.b = get_or(s, "b", 1.0);
    c.scenario.obs_fraction = get_or(s, "obs_fraction", 1.0);
    c.scenario.robots = get_or(s, "robots", 3);
    c.scenario.centers = get_or(s, "centers", 60);
    c.scenario.threshold = get_or(s, "threshold", 20.0);
    c.scenario.train_per_robot = get_or(s, "train_per_robot", 4000);
    c.scenario.verify_per_robot = get_or(s, "verify_per_robot", 600);
    if (s.contains("topology")) {
      const Json& t = s.at("topology");
      reject_unknown(t, {"kind", "edges", "p"}, "scenario.topology.");
      c.scenario.topology.kind = get_or<std::string>(t, "kind", "ring");
      c.scenario.topology.edges = get_or(t, "edges", 0);
      c.scenario.topology.er_prob = get_or(t, "p", 0.4);
    }
    if (c.scenario.obs_fraction <= 0.0 || c.scenario.obs_fraction > 1.0)
      throw ConfigError("scenario.obs_fraction must lie in (0, 1]");
  }

  if (j.contains("estimator")) {
    const Json& e = j.at("estimator");
    reject_unknown(e, {"kind", "schedule", "alpha"}, "estimator.");
    c.estimator.kind = get_or<std::string>(e, "kind", "distributed");
    parse_estimator(c.estimator.kind);  // validation
    c.estimator.schedule = get_or<std::string>(e, "schedule", "const:1");
    StepSchedule::parse(c.estimator.schedule);  // validation
    c.estimator.circular_alpha = get_or(e, "alpha", 0.8);
    if (c.estimator.circular_alpha <= 0.0 || c.estimator.circular_alpha > 1.0)
      throw ConfigError("estimator.alpha must lie in (0, 1]");
  }

  if (j.contains("run")) {
    const Json& r = j.at("run");
    reject_unknown(r, {"rounds", "metric_cadence", "out", "emit_plot", "track_reference"},
                   "run.");
    c.run.rounds = get_or(r, "rounds", 500);
    c.run.metric_cadence = get_or(r, "metric_cadence", 1);
    c.run.out = get_or<std::string>(r, "out", "out");
    c.run.emit_plot = get_or(r, "emit_plot", false);
    c.run.track_reference = get_or(r, "track_reference", true);
    if (c.run.rounds < 0) throw ConfigError("run.rounds must be nonnegative");
    if (c.run.metric_cadence < 1) throw ConfigError("run.metric_cadence must be positive");
  }

  if (j.contains("sweep")) {
    const Json& s = j.at("sweep");
    reject_unknown(s, {"b", "topology_edges", "estimators", "seeds"}, "sweep.");
    SweepConfig sweep;
    sweep.b = get_or(s, "b", std::vector<double>{});
    sweep.topology_edges = get_or(s, "topology_edges", std::vector<int>{});
    sweep.estimators = get_or(s, "estimators", std::vector<std::string>{});
    for (const auto& e : sweep.estimators) parse_estimator(e);
    sweep.seeds = get_or(s, "seeds", std::vector<std::uint64_t>{});
    c.sweep = std::move(sweep);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

// FNV-1a over the canonical (key-sorted) dump; identical semantics give an
// identical hash regardless of the source formatting.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string canon = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char byte : canon) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Named presets pinning every parameter used by the acceptance tests.
inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "localization-fig2") {
    c.scenario.kind = "localization";
    c.scenario.n = 8;
    c.scenario.topology = {"ring"};
    c.scenario.b = 1.0;
    c.scenario.seed = 7;
    c.estimator.kind = "marginal";
    c.estimator.schedule = "const:1";
    c.run.rounds = 1600;
    c.run.metric_cadence = 1;
    return c;
  }
  if (name == "localization-fig3-sweep") {
    c.scenario.kind = "localization";
    c.scenario.n = 8;
    c.scenario.topology = {"interpolated", 7};
    c.scenario.b = 1.0;
    c.scenario.seed = 7;
    c.estimator.kind = "distributed";
    c.estimator.schedule = "const:1";
    c.run.rounds = 500;
    c.run.metric_cadence = 25;
    SweepConfig sweep;
    sweep.b = {1.0, 2.0, 5.0, 10.0};
    sweep.topology_edges = {7, 11, 15, 19, 23, 27};
    sweep.estimators = {"distributed", "marginal", "bp", "circular-bp"};
    sweep.seeds = {7};
    c.sweep = sweep;
    return c;
  }
  if (name == "mapping-desk") {
    c.scenario.kind = "mapping";
    c.scenario.robots = 3;
    c.scenario.centers = 60;
    c.scenario.threshold = 20.0;
    c.scenario.seed = 9;
    c.estimator.kind = "marginal";
    c.estimator.schedule = "const:1";
    c.run.rounds = 20000;
    c.run.metric_cadence = 100;
    c.run.track_reference = false;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

inline std::vector<std::string> preset_names() {
  return {"localization-fig2", "localization-fig3-sweep", "mapping-desk"};
}

}  // namespace smdnet
