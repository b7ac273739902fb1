#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "smdnet/config.hpp"
#include "smdnet/runner.hpp"

namespace smdnet {

inline std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(const std::string& path, const RoundTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  out << "round,agent,error,consensus_tv,kl_ref\n";
  for (const auto& r : trace.rows)
    out << r.round << ',' << r.agent << ',' << format_metric(r.error) << ','
        << format_metric(r.consensus_tv) << ',' << format_metric(r.kl_ref) << '\n';
}

// Static plot of the network-average error per metric round. Write-only
// artifact with no parsing contract.
inline void write_svg(const std::string& path, const RoundTrace& trace,
                      const std::string& title) {
  std::vector<int> rounds;
  std::vector<double> means;
  for (const auto& r : trace.rows) {
    if (rounds.empty() || rounds.back() != r.round) {
      rounds.push_back(r.round);
      means.push_back(0.0);
    }
  }
  std::vector<int> counts(rounds.size(), 0);
  for (const auto& r : trace.rows) {
    for (std::size_t k = 0; k < rounds.size(); ++k)
      if (rounds[k] == r.round) {
        means[k] += r.error;
        counts[k] += 1;
      }
  }
  double max_err = 1e-12, max_round = 1.0;
  for (std::size_t k = 0; k < rounds.size(); ++k) {
    means[k] /= std::max(1, counts[k]);
    max_err = std::max(max_err, means[k]);
    max_round = std::max(max_round, static_cast<double>(rounds[k]));
  }
  const double w = 840, h = 520, ml = 70, mb = 60, mt = 40, mr = 20;
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
      << "</text>\n"
      << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
      << "' stroke='black'/>\n"
      << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
      << "' stroke='black'/>\n"
      << "<text x='" << w / 2 << "' y='" << h - 16
      << "' text-anchor='middle' font-size='12'>round</text>\n"
      << "<text x='18' y='" << h / 2
      << "' text-anchor='middle' font-size='12' transform='rotate(-90 18 " << h / 2
      << ")'>network average error</text>\n";
  svg << "<polyline fill='none' stroke='#1f77b4' stroke-width='1.5' points='";
  for (std::size_t k = 0; k < rounds.size(); ++k) {
    const double x = ml + (w - ml - mr) * rounds[k] / max_round;
    const double y = (h - mb) - (h - mb - mt) * means[k] / max_err;
    svg << x << ',' << y << ' ';
  }
  svg << "'/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = max_err * tick / 4.0;
    const double y = (h - mb) - (h - mb - mt) * tick / 4.0;
    svg << "<text x='" << ml - 8 << "' y='" << y + 4
        << "' text-anchor='end' font-size='10'>" << format_metric(v).substr(0, 6)
        << "</text>\n";
    const double r = max_round * tick / 4.0;
    const double x = ml + (w - ml - mr) * tick / 4.0;
    svg << "<text x='" << x << "' y='" << h - mb + 16
        << "' text-anchor='middle' font-size='10'>" << static_cast<int>(r) << "</text>\n";
  }
  svg << "</svg>\n";
  std::ofstream out(path, std::ios::binary);
  out << svg.str();
}

inline void write_manifest(const std::string& path, const ExperimentConfig& config,
                           const std::vector<std::string>& outputs) {
  Json j;
  j["config"] = to_json(config);
  j["config_hash"] = config_hash(config);
  j["library_version"] = kLibraryVersion;
  j["outputs"] = outputs;
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
}

inline void write_ground_truth(const std::string& path, const LocalizationScenario& s) {
  Json j;
  j["kind"] = "localization";
  j["anchor"] = s.anchor;
  Json positions = Json::array();
  for (const auto& p : s.truth) positions.push_back({p(0), p(1)});
  j["truth"] = positions;
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
}

inline void write_ground_truth(const std::string& path, const MappingScenario& s) {
  Json j;
  j["kind"] = "mapping";
  Json centers = Json::array();
  for (const auto& c : s.centers) centers.push_back({c(0), c(1)});
  j["centers"] = centers;
  j["true_weights"] = std::vector<double>(s.true_weights.data(),
                                          s.true_weights.data() + s.true_weights.size());
  j["stored_parameters"] = s.stored_parameters();
  j["full_replication_parameters"] = s.full_replication_parameters();
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
}

struct RunArtifacts {
  std::string tag;
  std::string csv_path;
  RoundTrace trace;
  double final_network_error = 0.0;
};

// Execute one configured run and write its trace (and optional plot).
inline RunArtifacts execute_single(const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  fs::create_directories(c.run.out);
  const EstimatorKind kind = parse_estimator(c.estimator.kind);
  const StepSchedule schedule = StepSchedule::parse(c.estimator.schedule);
  RunOptions options;
  options.metric_cadence = c.run.metric_cadence;
  options.circular_alpha = c.estimator.circular_alpha;
  options.track_reference = c.run.track_reference;

  RunArtifacts art;
  std::string tag = c.scenario.label() + "_" + c.estimator.kind + "_seed" +
                    std::to_string(c.scenario.seed);
  art.tag = tag;
  art.csv_path = (fs::path(c.run.out) / (tag + ".csv")).string();

  if (c.scenario.kind == "localization") {
    auto s = build_localization(c.scenario.n, c.scenario.topology, c.scenario.b, c.scenario.seed,
                                c.scenario.obs_fraction);
    art.trace =
        run_localization(s, kind, schedule, c.run.rounds, c.scenario.seed, options);
    write_ground_truth((fs::path(c.run.out) / (tag + "_truth.json")).string(), s);
  } else {
    auto s = build_mapping(c.scenario.robots, c.scenario.centers, c.scenario.threshold,
                           c.scenario.seed, c.scenario.train_per_robot,
                           c.scenario.verify_per_robot);
    art.trace = run_mapping(s, kind, c.run.rounds, c.scenario.seed, options);
    write_ground_truth((fs::path(c.run.out) / (tag + "_truth.json")).string(), s);
  }
  write_csv(art.csv_path, art.trace);
  if (c.run.emit_plot)
    write_svg((fs::path(c.run.out) / (tag + ".svg")).string(), art.trace, tag);
  art.final_network_error = art.trace.network_error_at(art.trace.last_round());
  return art;
}

// Cross product of the sweep lists with the base config as fallback.
inline std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& base) {
  if (!base.sweep || base.sweep->empty()) return {base};
  const SweepConfig& sw = *base.sweep;
  std::vector<double> bs = sw.b.empty() ? std::vector<double>{base.scenario.b} : sw.b;
  std::vector<int> edges = sw.topology_edges.empty() ? std::vector<int>{0} : sw.topology_edges;
  std::vector<std::string> kinds =
      sw.estimators.empty() ? std::vector<std::string>{base.estimator.kind} : sw.estimators;
  std::vector<std::uint64_t> seeds =
      sw.seeds.empty() ? std::vector<std::uint64_t>{base.scenario.seed} : sw.seeds;

  std::vector<ExperimentConfig> out;
  for (int e : edges)
    for (double b : bs)
      for (const auto& kind : kinds)
        for (std::uint64_t seed : seeds) {
          ExperimentConfig c = base;
          c.sweep.reset();
          c.scenario.b = b;
          c.scenario.seed = seed;
          if (e > 0) c.scenario.topology = {"interpolated", e};
          c.estimator.kind = kind;
          out.push_back(std::move(c));
        }
  return out;
}

struct SweepResult {
  std::vector<RunArtifacts> runs;
  std::string summary_path;
};

// Worker-pool execution; each run owns its output file, the summary is a
// single-threaded reduce in entry order.
inline SweepResult execute(const ExperimentConfig& config, int jobs = 1) {
  namespace fs = std::filesystem;
  const auto entries = expand_sweep(config);
  SweepResult result;
  result.runs.resize(entries.size());

  std::atomic<std::size_t> cursor{0};
  std::vector<std::string> errors(entries.size());
  auto worker = [&] {
    for (;;) {
      const std::size_t k = cursor.fetch_add(1);
      if (k >= entries.size()) return;
      try {
        result.runs[k] = execute_single(entries[k]);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(entries.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t k = 0; k < entries.size(); ++k)
    if (!errors[k].empty())
      throw SmdError("run '" + entries[k].scenario.label() + "' failed: " + errors[k]);

  std::vector<std::string> outputs;
  for (const auto& r : result.runs) outputs.push_back(r.csv_path);

  if (entries.size() > 1) {
    fs::create_directories(config.run.out);
    result.summary_path = (fs::path(config.run.out) / "summary.csv").string();
    std::ofstream out(result.summary_path, std::ios::binary);
    out << "scenario,topology,b,estimator,seed,rounds,final_error\n";
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& c = entries[k];
      out << c.scenario.kind << ',' << c.scenario.topology.label() << ','
          << format_metric(c.scenario.b) << ',' << c.estimator.kind << ',' << c.scenario.seed
          << ',' << c.run.rounds << ',' << format_metric(result.runs[k].final_network_error)
          << '\n';
    }
    outputs.push_back(result.summary_path);
  }
  write_manifest((fs::path(config.run.out) / "manifest.json").string(), config, outputs);
  return result;
}

}  // namespace smdnet
