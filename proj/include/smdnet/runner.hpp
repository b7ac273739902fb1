#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "smdnet/belief_propagation.hpp"
#include "smdnet/estimators.hpp"
#include "smdnet/scenarios.hpp"
#include "smdnet/schedule.hpp"

namespace smdnet {

enum class EstimatorKind { Centralized, Distributed, Marginal, Bp, CircularBp };

inline EstimatorKind parse_estimator(const std::string& name) {
  if (name == "centralized") return EstimatorKind::Centralized;
  if (name == "distributed") return EstimatorKind::Distributed;
  if (name == "marginal") return EstimatorKind::Marginal;
  if (name == "bp") return EstimatorKind::Bp;
  if (name == "circular-bp") return EstimatorKind::CircularBp;
  throw ConfigError("unknown estimator '" + name + "'");
}

inline std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Centralized: return "centralized";
    case EstimatorKind::Distributed: return "distributed";
    case EstimatorKind::Marginal: return "marginal";
    case EstimatorKind::Bp: return "bp";
    case EstimatorKind::CircularBp: return "circular-bp";
  }
  return "?";
}

struct RunOptions {
  int metric_cadence = 1;
  double circular_alpha = 0.8;
  bool track_reference = true;  // fill the kl_ref column from a shadow posterior
  bool track_consensus = true;  // fill the consensus_tv column (quadrature cost)
};

namespace detail {

// Cheap fixed-lattice TV used for the logged consensus metric (the public
// tv_distance keeps its Richardson refinement; this is a trace diagnostic).
inline double tv_metric(const GaussianDensity& a, const GaussianDensity& b, int pts = 81) {
  return std::min(1.0, tv_lattice(a, b, pts));
}

}  // namespace detail

// Synchronous round loop for the relative-localization scenario. Records one
// row per (metric round, agent): own-position error, the worst shared-
// marginal TV against a neighbor, and KL from the exact centralized
// posterior's marginal to the agent estimate.
inline RoundTrace run_localization(const LocalizationScenario& s, EstimatorKind kind,
                                   const StepSchedule& schedule, int rounds, std::uint64_t seed,
                                   const RunOptions& options = {}) {
  const int n = s.n;
  RoundTrace trace;

  std::vector<GaussianDensity> states;       // centralized/distributed/marginal
  std::vector<BPBelief> beliefs;             // bp modes
  std::vector<GaussianBPMessage> inbox;
  const bool bp_mode = kind == EstimatorKind::Bp || kind == EstimatorKind::CircularBp;
  const double bp_alpha = kind == EstimatorKind::Bp ? 1.0 : options.circular_alpha;

  switch (kind) {
    case EstimatorKind::Centralized:
      states.push_back(s.full_state_prior());
      break;
    case EstimatorKind::Distributed:
      for (int i = 0; i < n; ++i) states.push_back(s.full_state_prior());
      break;
    case EstimatorKind::Marginal:
      for (int i = 0; i < n; ++i) states.push_back(s.marginal_prior(i));
      break;
    case EstimatorKind::Bp:
    case EstimatorKind::CircularBp:
      for (int i = 0; i < n; ++i) beliefs.push_back(s.bp_prior(i));
      break;
  }

  GaussianDensity reference = s.full_state_prior();

  auto own_mean = [&](int agent) -> Vector {
    if (bp_mode) return beliefs[agent].mean();
    if (kind == EstimatorKind::Centralized) {
      const Vector mu = states[0].mean();
      return mu.segment(2 * agent, 2);
    }
    if (kind == EstimatorKind::Distributed) {
      const Vector mu = states[agent].mean();
      return mu.segment(2 * agent, 2);
    }
    const auto& subset = s.layout.agent_subset(agent);
    const Vector mu = states[agent].mean();
    int off = 0;
    for (VarId v : subset) {
      if (v == agent) return mu.segment(off, 2);
      off += 2;
    }
    throw LayoutError("agent is missing its own position variable");
  };

  auto consensus_gap = [&](int agent) -> double {
    if (!options.track_consensus) return 0.0;
    if (bp_mode || kind == EstimatorKind::Centralized) return 0.0;
    double worst = 0.0;
    for (int j : s.net.neighbors(agent)) {
      std::vector<VarId> shared;
      if (kind == EstimatorKind::Distributed) {
        shared = {agent, j};  // representative pair of the fully shared state
      } else {
        shared = s.layout.shared_subset(agent, j);
      }
      for (VarId v : shared) {
        auto mi = marginalize(states[agent], {v});
        auto mj = marginalize(states[j], {v});
        worst = std::max(worst, detail::tv_metric(mi, mj));
      }
    }
    return worst;
  };

  auto kl_to_reference = [&](int agent) -> double {
    if (!options.track_reference) return std::numeric_limits<double>::quiet_NaN();
    if (kind == EstimatorKind::Centralized) return kl_divergence(reference, states[0]);
    if (kind == EstimatorKind::Distributed) return kl_divergence(reference, states[agent]);
    if (kind == EstimatorKind::Marginal)
      return kl_divergence(marginalize(reference, s.layout.agent_subset(agent)), states[agent]);
    auto ref_marg = marginalize(reference, {agent});
    GaussianDensity belief_density(ref_marg.vars(), beliefs[agent].omega, beliefs[agent].eta);
    return kl_divergence(ref_marg, belief_density);
  };

  auto record = [&](int round) {
    std::vector<Vector> means;
    for (int i = 0; i < n; ++i) means.push_back(own_mean(i));
    const auto err = localization_error(means, s.truth);
    for (int i = 0; i < n; ++i)
      trace.rows.push_back({round, i, err[i], consensus_gap(i), kl_to_reference(i)});
  };

  if (rounds == 0) {
    record(0);
    return trace;
  }

  for (int t = 0; t < rounds; ++t) {
    try {
    const auto meas = s.sample_measurements(t, seed);
    const double alpha = schedule.alpha(t);

    if (options.track_reference) {
      for (int i = 0; i < n; ++i) {
        Vector z;
        if (auto model = s.full_state_model(meas, i, z))
          reference = linear_gaussian_posterior(reference, *model, z, 1.0);
      }
    }

    switch (kind) {
      case EstimatorKind::Centralized: {
        for (int i = 0; i < n; ++i) {
          Vector z;
          if (auto model = s.full_state_model(meas, i, z))
            states[0] = linear_gaussian_posterior(states[0], *model, z, alpha);
        }
        break;
      }
      case EstimatorKind::Distributed: {
        std::vector<std::optional<LinearGaussianModel>> models;
        std::vector<Vector> z(n);
        for (int i = 0; i < n; ++i) models.push_back(s.full_state_model(meas, i, z[i]));
        states = gaussian_distributed_round(states, s.net, models, z, alpha).next;
        break;
      }
      case EstimatorKind::Marginal: {
        std::vector<std::optional<LinearGaussianModel>> models;
        std::vector<Vector> z(n);
        for (int i = 0; i < n; ++i) models.push_back(s.marginal_model(meas, i, z[i]));
        states = gaussian_marginal_round(states, s.net, s.layout, models, z, alpha).next;
        break;
      }
      case EstimatorKind::Bp:
      case EstimatorKind::CircularBp: {
        auto out = circular_bp_round(beliefs, inbox, meas, s.net, CircularBPConfig{bp_alpha});
        beliefs = std::move(out.beliefs);
        inbox = std::move(out.outbox);
        break;
      }
    }

    } catch (const SmdError& e) {
      throw SmdError("round " + std::to_string(t) + ": " + e.what());
    }
    const int round = t + 1;
    if (round % options.metric_cadence == 0) record(round);
  }
  return trace;
}

inline GaussianDensity gauss_scalar(double omega, double mu) {
  Matrix om(1, 1);
  om << omega;
  Vector eta(1);
  eta << omega * mu;
  return GaussianDensity({{0, 1, "w"}}, om, eta);
}

// Round loop for the mapping scenario (diagonalized marginal GVI).
inline RoundTrace run_mapping(const MappingScenario& s, EstimatorKind kind, int rounds,
                              std::uint64_t seed, const RunOptions& options = {}) {
  if (kind != EstimatorKind::Marginal)
    throw ConfigError("mapping scenario supports the marginal estimator only");
  RoundTrace trace;
  std::vector<DiagonalGaussian> states;
  for (int a = 0; a < s.robots; ++a) states.push_back(s.prior(a));
  GaussHermite gh(21);

  auto shared_gap = [&](int agent) -> double {
    if (!options.track_consensus) return 0.0;
    double worst = 0.0;
    for (int j : s.net.neighbors(agent)) {
      const auto& src = s.maps.source(agent, j);
      for (std::size_t k = 0; k < src.size(); ++k) {
        if (src[k] < 0) continue;
        auto g1 = gauss_scalar(states[agent].omega(k), states[agent].mu(k));
        auto g2 = gauss_scalar(states[j].omega(src[k]), states[j].mu(src[k]));
        worst = std::max(worst, detail::tv_metric(g1, g2, 201));
      }
    }
    return worst;
  };

  auto record = [&](int round) {
    for (int a = 0; a < s.robots; ++a)
      trace.rows.push_back({round, a, mapping_error(s, a, states[a].mu), shared_gap(a),
                            std::numeric_limits<double>::quiet_NaN()});
  };

  if (rounds == 0) {
    record(0);
    return trace;
  }

  std::vector<MappingSample> current(s.robots);
  for (int t = 0; t < rounds; ++t) {
    try {
      for (int a = 0; a < s.robots; ++a) current[a] = s.draw_train_sample(a, t, seed);
      auto model = mapping_gvi_model(s, current, gh);
      states = diag_gvi_step(states, s.net, s.maps, model);
    } catch (const SmdError& e) {
      throw SmdError("round " + std::to_string(t) + ": " + e.what());
    }
    const int round = t + 1;
    if (round % options.metric_cadence == 0) record(round);
  }
  return trace;
}

}  // namespace smdnet
