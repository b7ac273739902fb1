#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "smdnet/smdnet.hpp"

namespace {

using namespace smdnet;

Json suite_to_json(const SuiteReport& report) {
  Json j;
  j["suite"] = report.suite;
  j["pass"] = report.pass();
  j["propositions"] = Json::array();
  for (const auto& p : report.propositions) {
    j["propositions"].push_back({{"name", p.name},
                                 {"instances", p.instances},
                                 {"max_violation", p.max_violation},
                                 {"tolerance", p.tolerance},
                                 {"gating", p.gating},
                                 {"pass", p.pass()}});
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed Bayesian density estimation over agent networks"};
  app.require_subcommand(1);

  // ---- run ----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Execute a scenario (or a sweep) and write CSV traces");
  std::string config_path, scenario_name, estimator, schedule, out_dir;
  int rounds = -1, cadence = -1, jobs = 1;
  std::int64_t seed = -1;
  double circular_alpha = -1.0, obs_fraction = -1.0;
  bool emit_plot = false;
  run->add_option("--config", config_path, "JSON experiment config");
  run->add_option("--scenario", scenario_name,
                  "Preset: localization-fig2 | localization-fig3-sweep | mapping-desk");
  run->add_option("--estimator", estimator,
                  "centralized | distributed | marginal | bp | circular-bp");
  run->add_option("--rounds", rounds, "Synchronous rounds T");
  run->add_option("--seed", seed, "Scenario and observation seed");
  run->add_option("--alpha", circular_alpha, "Circular BP alpha in (0,1]");
  run->add_option("--schedule", schedule, "Step schedule, e.g. const:1 or rm:1,1,0.75");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--jobs", jobs, "Worker threads for sweeps");
  run->add_option("--obs-fraction", obs_fraction, "Per-round directed-edge sampling fraction");
  run->add_option("--cadence", cadence, "Metric cadence (rows every k rounds)");
  run->add_flag("--emit-plot", emit_plot, "Also write an SVG error plot per run");

  // ---- verify ---------------------------------------------------------------
  auto* verify = app.add_subcommand("verify", "Run a numerical proposition suite");
  std::string suite, report_path;
  std::int64_t verify_seed = 0;
  verify->add_option("suite", suite, "Suite name or 'all'")->required();
  verify->add_option("--seed", verify_seed, "Randomization seed");
  verify->add_option("--out", report_path, "Write the JSON report to a file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ExperimentConfig config;
      if (!config_path.empty())
        config = load_config(config_path);
      else if (!scenario_name.empty())
        config = preset(scenario_name);
      else
        throw ConfigError("run needs --config or --scenario");

      if (!estimator.empty()) {
        parse_estimator(estimator);
        config.estimator.kind = estimator;
        if (config.sweep) config.sweep->estimators = {estimator};
      }
      if (!schedule.empty()) {
        StepSchedule::parse(schedule);
        config.estimator.schedule = schedule;
      }
      if (rounds >= 0) config.run.rounds = rounds;
      if (cadence >= 1) config.run.metric_cadence = cadence;
      if (!out_dir.empty()) config.run.out = out_dir;
      if (circular_alpha > 0.0) config.estimator.circular_alpha = circular_alpha;
      if (obs_fraction > 0.0) config.scenario.obs_fraction = obs_fraction;
      if (seed >= 0) config.scenario.seed = static_cast<std::uint64_t>(seed);
      if (const char* env = std::getenv("MC_SEED_OVERRIDE")) {
        config.scenario.seed = std::strtoull(env, nullptr, 10);
        if (config.sweep) config.sweep->seeds = {config.scenario.seed};
      }
      config.run.emit_plot = config.run.emit_plot || emit_plot;

      auto result = execute(config, jobs);
      for (const auto& r : result.runs)
        std::cout << r.tag << ": " << r.trace.rows.size() << " rows, final error "
                  << format_metric(r.final_network_error) << " -> " << r.csv_path << '\n';
      if (!result.summary_path.empty()) std::cout << "summary -> " << result.summary_path << '\n';
      return 0;
    }

    if (verify->parsed()) {
      std::vector<std::string> names;
      if (suite == "all")
        names = verify_suite_names();
      else
        names = {suite};
      Json combined = Json::array();
      bool all_pass = true;
      for (const auto& name : names) {
        auto report = run_verify_suite(name, static_cast<std::uint64_t>(verify_seed));
        combined.push_back(suite_to_json(report));
        all_pass = all_pass && report.pass();
        std::cout << (report.pass() ? "[PASS] " : "[FAIL] ") << report.suite << '\n';
        for (const auto& p : report.propositions)
          std::cout << "  " << (p.pass() ? "ok   " : (p.gating ? "FAIL " : "info "))
                    << p.name << ": instances=" << p.instances
                    << " max_violation=" << format_metric(p.max_violation) << '\n';
      }
      if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::binary);
        out << combined.dump(2) << '\n';
      }
      return all_pass ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
