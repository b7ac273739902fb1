#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smdnet/errors.hpp"
#include "smdnet/gaussian.hpp"
#include "smdnet/gaussian_inference.hpp"
#include "smdnet/grid.hpp"
#include "smdnet/network.hpp"
#include "smdnet/schedule.hpp"
#include "smdnet/variables.hpp"

namespace smdnet {

// Neighbor message for one synchronous round: in distributed mode the full
// density, in marginal mode the sender's marginal over the shared variables.
template <typename Density>
struct Message {
  int from = -1;
  int to = -1;
  Density density;
};

template <typename Density>
struct AgentState {
  int id = -1;
  Density estimate;
  std::vector<Message<Density>> inbox;
};

// Per-round, per-agent metrics record; the unit all traces and acceptance
// checks are driven from.
struct RoundRow {
  int round = 0;
  int agent = 0;
  double error = 0.0;
  double consensus_tv = 0.0;
  double kl_ref = std::numeric_limits<double>::quiet_NaN();
};

struct RoundTrace {
  std::vector<RoundRow> rows;

  double network_error_at(int round) const {
    double acc = 0.0;
    int count = 0;
    for (const auto& r : rows)
      if (r.round == round) {
        acc += r.error;
        ++count;
      }
    if (count == 0) throw LayoutError("RoundTrace: no rows at requested round");
    return acc / count;
  }

  int last_round() const {
    int last = 0;
    for (const auto& r : rows) last = std::max(last, r.round);
    return last;
  }
};

namespace detail {

template <typename Density>
const Density& find_message(const std::vector<Message<Density>>& inbox, int from) {
  for (const auto& m : inbox)
    if (m.from == from) return m.density;
  throw ProtocolError("missing neighbor message from agent " + std::to_string(from));
}

}  // namespace detail

// ---- Grid-mode estimator steps ------------------------------------------

// p_{t+1} proportional to q(z_t|X)^{alpha_t} p_t.
inline GridDensity grid_centralized_step(const GridDensity& p, const std::vector<double>& loglik,
                                         double alpha) {
  return grid_bayes_update(p, loglik, alpha);
}

struct GridRoundResult {
  std::vector<GridDensity> next;
  std::vector<GridDensity> mixed;       // v_{i,t}, logged for iterate-gap checks
  std::vector<double> log_z;            // normalization deficit per agent
};

inline std::vector<std::vector<Message<GridDensity>>> grid_distributed_messages(
    const std::vector<GridDensity>& states, const Network& net) {
  std::vector<std::vector<Message<GridDensity>>> inboxes(net.size());
  for (int j = 0; j < net.size(); ++j)
    for (int i : net.neighbors(j)) inboxes[i].push_back({j, i, states[j]});
  return inboxes;
}

// Two-phase distributed round over full-state grids: geometric mixing with
// the agent's weight row, then the exponentiated local Bayes update.
inline GridRoundResult grid_distributed_round(const std::vector<GridDensity>& states,
                                              const Network& net,
                                              const std::vector<std::vector<double>>& logliks,
                                              double alpha) {
  const int n = net.size();
  if (static_cast<int>(states.size()) != n || static_cast<int>(logliks.size()) != n)
    throw LayoutError("grid_distributed_round: state/likelihood count mismatch");
  const auto inboxes = grid_distributed_messages(states, net);
  GridRoundResult out;
  for (int i = 0; i < n; ++i) {
    std::vector<GridDensity> parts{states[i]};
    std::vector<double> w{net.weights()(i, i)};
    for (int j : net.neighbors(i)) {
      parts.push_back(detail::find_message(inboxes[i], j));
      w.push_back(net.weights()(i, j));
    }
    GridMixResult mix = grid_geometric_mix(parts, w);
    out.next.push_back(grid_bayes_update(mix.density, logliks[i], alpha));
    out.mixed.push_back(std::move(mix.density));
    out.log_z.push_back(mix.log_z);
  }
  return out;
}

inline std::vector<std::vector<Message<GridDensity>>> grid_marginal_messages(
    const std::vector<GridDensity>& states, const Network& net, const VariableLayout& layout) {
  std::vector<std::vector<Message<GridDensity>>> inboxes(net.size());
  for (int j = 0; j < net.size(); ++j) {
    for (int i : net.neighbors(j)) {
      const std::vector<VarId> shared = layout.shared_subset(i, j);
      if (shared.empty()) continue;
      inboxes[i].push_back({j, i, grid_marginalize(states[j], shared)});
    }
  }
  return inboxes;
}

// Algorithm "marginal density averaging": receive neighbor marginals, merge
// each with the self conditional, pool geometrically, then update with the
// local likelihood.
inline GridRoundResult grid_marginal_round(const std::vector<GridDensity>& states,
                                           const std::vector<std::vector<Message<GridDensity>>>& inboxes,
                                           const Network& net, const VariableLayout& layout,
                                           const std::vector<std::vector<double>>& logliks,
                                           double alpha) {
  const int n = net.size();
  GridRoundResult out;
  for (int i = 0; i < n; ++i) {
    std::vector<GridDensity> parts{states[i]};
    std::vector<double> w{net.weights()(i, i)};
    for (int j : net.neighbors(i)) {
      const std::vector<VarId> shared = layout.shared_subset(i, j);
      if (shared.empty()) {
        // No co-estimated variable: the neighbor term degenerates to the
        // self estimate, so fold its weight into the self term.
        w[0] += net.weights()(i, j);
        continue;
      }
      const GridDensity& marg = detail::find_message(inboxes[i], j);
      for (const auto& a : marg.axes())
        if (!std::binary_search(shared.begin(), shared.end(), a.id))
          throw LayoutError("grid_marginal_round: neighbor message variable mismatch");
      parts.push_back(grid_conditional_marginal_product(states[i], marg));
      w.push_back(net.weights()(i, j));
    }
    GridMixResult mix = grid_geometric_mix(parts, w);
    out.next.push_back(grid_bayes_update(mix.density, logliks[i], alpha));
    out.mixed.push_back(std::move(mix.density));
    out.log_z.push_back(mix.log_z);
  }
  return out;
}

inline GridRoundResult grid_marginal_round(const std::vector<GridDensity>& states,
                                           const Network& net, const VariableLayout& layout,
                                           const std::vector<std::vector<double>>& logliks,
                                           double alpha) {
  return grid_marginal_round(states, grid_marginal_messages(states, net, layout), net, layout,
                             logliks, alpha);
}

// Network geometric average p_bar (proxy for the centralized estimate).
inline GridDensity grid_network_average(const std::vector<GridDensity>& states) {
  return grid_geometric_mix(states, std::vector<double>(states.size(), 1.0 / states.size()))
      .density;
}

// ---- Gaussian-mode estimator steps --------------------------------------

inline GaussianDensity gaussian_centralized_step(const GaussianDensity& p,
                                                 const LinearGaussianModel& model,
                                                 const Vector& z, double alpha) {
  return linear_gaussian_posterior(p, model, z, alpha);
}

struct GaussianRoundResult {
  std::vector<GaussianDensity> next;
  std::vector<GaussianDensity> mixed;
};

// Distributed round over full-state Gaussians: information averaging with the
// weight row, then the linear-Gaussian update. An absent model means the
// agent observed nothing this round and keeps its mixed density.
inline GaussianRoundResult gaussian_distributed_round(
    const std::vector<GaussianDensity>& states, const Network& net,
    const std::vector<std::optional<LinearGaussianModel>>& models, const std::vector<Vector>& z,
    double alpha) {
  const int n = net.size();
  GaussianRoundResult out;
  for (int i = 0; i < n; ++i) {
    std::vector<GaussianDensity> parts{states[i]};
    std::vector<double> w{net.weights()(i, i)};
    for (int j : net.neighbors(i)) {
      parts.push_back(states[j]);
      w.push_back(net.weights()(i, j));
    }
    GaussianDensity mixed = geometric_mean(parts, w);
    out.next.push_back(models[i] ? linear_gaussian_posterior(mixed, *models[i], z[i], alpha)
                                 : mixed);
    out.mixed.push_back(std::move(mixed));
  }
  return out;
}

inline std::vector<std::vector<Message<GaussianDensity>>> gaussian_marginal_messages(
    const std::vector<GaussianDensity>& states, const Network& net,
    const VariableLayout& layout) {
  std::vector<std::vector<Message<GaussianDensity>>> inboxes(net.size());
  for (int j = 0; j < net.size(); ++j) {
    for (int i : net.neighbors(j)) {
      const std::vector<VarId> shared = layout.shared_subset(i, j);
      if (shared.empty()) continue;
      inboxes[i].push_back({j, i, marginalize(states[j], shared)});
    }
  }
  return inboxes;
}

inline GaussianRoundResult gaussian_marginal_round(
    const std::vector<GaussianDensity>& states,
    const std::vector<std::vector<Message<GaussianDensity>>>& inboxes, const Network& net,
    const VariableLayout& layout, const std::vector<std::optional<LinearGaussianModel>>& models,
    const std::vector<Vector>& z, double alpha) {
  const int n = net.size();
  GaussianRoundResult out;
  for (int i = 0; i < n; ++i) {
    std::map<int, GaussianDensity> neighbor_marginals;
    std::map<int, double> weights;
    weights[i] = net.weights()(i, i);
    for (int j : net.neighbors(i)) {
      const std::vector<VarId> shared = layout.shared_subset(i, j);
      if (shared.empty()) {
        weights[i] += net.weights()(i, j);
        continue;
      }
      const GaussianDensity& marg = detail::find_message(inboxes[i], j);
      for (const auto& v : marg.vars())
        if (!std::binary_search(shared.begin(), shared.end(), v.id))
          throw LayoutError("gaussian_marginal_round: neighbor message variable mismatch");
      neighbor_marginals.emplace(j, marg);
      weights[j] = net.weights()(i, j);
    }
    GaussianDensity mixed = gaussian_marginal_mix(states[i], neighbor_marginals, weights, i);
    out.next.push_back(models[i] ? linear_gaussian_posterior(mixed, *models[i], z[i], alpha)
                                 : mixed);
    out.mixed.push_back(std::move(mixed));
  }
  return out;
}

inline GaussianRoundResult gaussian_marginal_round(
    const std::vector<GaussianDensity>& states, const Network& net, const VariableLayout& layout,
    const std::vector<std::optional<LinearGaussianModel>>& models, const std::vector<Vector>& z,
    double alpha) {
  return gaussian_marginal_round(states, gaussian_marginal_messages(states, net, layout), net,
                                 layout, models, z, alpha);
}

}  // namespace smdnet
