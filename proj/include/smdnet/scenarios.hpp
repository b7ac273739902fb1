#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smdnet/belief_propagation.hpp"
#include "smdnet/errors.hpp"
#include "smdnet/gaussian.hpp"
#include "smdnet/gaussian_inference.hpp"
#include "smdnet/grid.hpp"
#include "smdnet/network.hpp"
#include "smdnet/rng.hpp"
#include "smdnet/variables.hpp"

namespace smdnet {

// Stream tags for keyed observation sampling.
enum : std::uint64_t {
  kStreamTruth = 1,
  kStreamObservation = 2,
  kStreamEdgeMask = 3,
  kStreamLabels = 4,
  kStreamVerify = 5,
  kStreamTrain = 6,
  kStreamDataset = 7,
};

// ---- Relative localization ------------------------------------------------

struct TopologySpec {
  std::string kind = "ring";  // line|ring|star|complete|erdos-renyi|interpolated
  int edges = 0;              // for interpolated
  double er_prob = 0.4;

  std::string label() const {
    if (kind == "interpolated") return "edges" + std::to_string(edges);
    return kind;
  }
};

// Agents estimate their 2d positions from noisy relative measurements of
// their neighbors; agent 0 is an anchor pinned at the origin through a
// near-delta prior block.
struct LocalizationScenario {
  int n = 0;
  TopologySpec topology;
  double b = 1.0;  // per-edge measurement information magnitude, Omega_ij = b I2
  std::uint64_t seed = 0;
  double obs_fraction = 1.0;  // per-round directed-edge sampling probability
  int anchor = 0;

  Network net{1, {}, Eigen::MatrixXd::Ones(1, 1)};
  VariableLayout layout;
  VariableSubgraphIndex subgraphs;
  std::vector<Vector> truth;  // truth[i] in R^2, truth[anchor] = 0

  static constexpr double kPriorInfo = 1e-2;
  static constexpr double kAnchorInfo = 1e8;

  // Directed measurement edges for one round (subject to obs_fraction).
  std::vector<std::pair<int, int>> round_edges(int round, std::uint64_t run_seed) const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < n; ++i) {
      Rng mask = Rng::keyed(run_seed, i, round, kStreamEdgeMask);
      for (int j : net.neighbors(i)) {
        const bool keep = obs_fraction >= 1.0 || mask.bernoulli(obs_fraction);
        if (keep) out.push_back({i, j});
      }
    }
    return out;
  }

  // z_ij = x_i - x_j + noise, noise info b I2. Draws are keyed per
  // (agent, round) so agent iteration order cannot change them.
  std::vector<PairwiseMeasurement> sample_measurements(int round, std::uint64_t run_seed) const {
    std::vector<PairwiseMeasurement> out;
    const auto edges = round_edges(round, run_seed);
    const double sd = 1.0 / std::sqrt(b);
    int prev_agent = -1;
    Rng rng(0);
    for (const auto& [i, j] : edges) {
      if (i != prev_agent) {
        rng = Rng::keyed(run_seed, i, round, kStreamObservation);
        prev_agent = i;
      }
      Vector z(2);
      z << truth[i](0) - truth[j](0) + sd * rng.normal(),
          truth[i](1) - truth[j](1) + sd * rng.normal();
      out.push_back({i, j, z, b * Matrix::Identity(2, 2)});
    }
    return out;
  }

  // Full-state observation model for agent i (rows stacked per present
  // edge); empty when the agent took no measurement this round.
  std::optional<LinearGaussianModel> full_state_model(
      const std::vector<PairwiseMeasurement>& meas, int agent, Vector& z_out) const {
    return stacked_model(meas, agent, layout_all_, z_out);
  }

  // Marginal-mode observation model over X_i.
  std::optional<LinearGaussianModel> marginal_model(const std::vector<PairwiseMeasurement>& meas,
                                                    int agent, Vector& z_out) const {
    return stacked_model(meas, agent, layout.agent_subset(agent), z_out);
  }

  GaussianDensity full_state_prior() const {
    const int d = 2 * n;
    Matrix omega = kPriorInfo * Matrix::Identity(d, d);
    omega.block(2 * anchor, 2 * anchor, 2, 2) += kAnchorInfo * Matrix::Identity(2, 2);
    std::vector<Variable> vars;
    for (int v = 0; v < n; ++v) vars.push_back({v, 2, "x" + std::to_string(v)});
    return GaussianDensity(vars, omega, Vector::Zero(d));
  }

  GaussianDensity marginal_prior(int agent) const {
    const auto& subset = layout.agent_subset(agent);
    int d = 0;
    std::vector<Variable> vars;
    for (VarId v : subset) {
      vars.push_back({v, 2, "x" + std::to_string(v)});
      d += 2;
    }
    Matrix omega = kPriorInfo * Matrix::Identity(d, d);
    int off = 0;
    for (VarId v : subset) {
      if (v == anchor) omega.block(off, off, 2, 2) += kAnchorInfo * Matrix::Identity(2, 2);
      off += 2;
    }
    return GaussianDensity(std::move(vars), omega, Vector::Zero(d));
  }

  BPBelief bp_prior(int agent) const {
    const double info = agent == anchor ? kAnchorInfo : kPriorInfo;
    return {info * Matrix::Identity(2, 2), Vector::Zero(2)};
  }

  std::vector<VarId> layout_all() const { return layout_all_; }

 private:
  friend LocalizationScenario build_localization(int, const TopologySpec&, double, std::uint64_t,
                                                 double);
  std::vector<VarId> layout_all_;

  std::optional<LinearGaussianModel> stacked_model(const std::vector<PairwiseMeasurement>& meas,
                                                   int agent, const std::vector<VarId>& scope,
                                                   Vector& z_out) const {
    std::map<VarId, int> offset;
    int d = 0;
    for (VarId v : scope) {
      offset[v] = d;
      d += 2;
    }
    std::vector<const PairwiseMeasurement*> own;
    for (const auto& m : meas)
      if (m.from == agent) own.push_back(&m);
    if (own.empty()) return std::nullopt;
    const int rows = 2 * static_cast<int>(own.size());
    Matrix h = Matrix::Zero(rows, d);
    Matrix v = Matrix::Zero(rows, rows);
    z_out = Vector::Zero(rows);
    int r = 0;
    for (const auto* m : own) {
      h.block(r, offset.at(m->from), 2, 2) = Matrix::Identity(2, 2);
      h.block(r, offset.at(m->to), 2, 2) = -Matrix::Identity(2, 2);
      v.block(r, r, 2, 2) = m->omega;
      z_out.segment(r, 2) = m->z;
      r += 2;
    }
    return LinearGaussianModel(std::move(h), std::move(v));
  }
};

inline LocalizationScenario build_localization(int n, const TopologySpec& topology, double b,
                                               std::uint64_t seed, double obs_fraction = 1.0) {
  if (n < 2) throw ConfigError("localization needs at least two agents");
  if (!(b > 0.0)) throw ConfigError("localization needs positive measurement information b");
  LocalizationScenario s;
  s.n = n;
  s.topology = topology;
  s.b = b;
  s.seed = seed;
  s.obs_fraction = obs_fraction;
  auto edges = topology_edges(topology.kind, n, seed, topology.edges, topology.er_prob);
  if (!is_connected(n, edges)) throw ConnectivityError("localization topology is disconnected");
  s.net = Network::with_sinkhorn_weights(n, std::move(edges));

  for (int v = 0; v < n; ++v) {
    s.layout.add_variable("x" + std::to_string(v), 2);
    s.layout_all_.push_back(v);
  }
  for (int i = 0; i < n; ++i) {
    std::vector<VarId> subset;
    for (int j : s.net.closed_neighborhood(i)) subset.push_back(j);
    s.layout.set_agent_subset(i, subset);
  }
  s.subgraphs = validate_marginal_consensus(s.layout, s.net);

  // True positions: anchor at the origin, the rest uniform in a 10x10 box
  // with minimum pairwise separation 1.
  Rng rng = Rng::keyed(seed, 0, 0, kStreamTruth);
  s.truth.assign(n, Vector::Zero(2));
  for (int i = 0; i < n; ++i) {
    if (i == s.anchor) continue;
    for (int attempt = 0;; ++attempt) {
      Vector c(2);
      c << rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0);
      bool ok = true;
      for (int j = 0; j < i; ++j)
        if ((c - s.truth[j]).norm() < 1.0) ok = false;
      if (c.norm() < 1.0) ok = false;
      if (ok) {
        s.truth[i] = c;
        break;
      }
      if (attempt > 10000) throw ConfigError("could not place agents with minimum separation");
    }
  }
  return s;
}

// Euclidean error of each agent's estimate of its own position, plus the
// network average in the last slot.
inline std::vector<double> localization_error(const std::vector<Vector>& own_position_means,
                                              const std::vector<Vector>& truth) {
  if (own_position_means.size() != truth.size())
    throw LayoutError("localization_error: estimate/truth count mismatch");
  std::vector<double> err(truth.size() + 1, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    err[i] = (own_position_means[i] - truth[i]).norm();
    err.back() += err[i];
  }
  err.back() /= static_cast<double>(truth.size());
  return err;
}

// ---- Kernel-logistic occupancy mapping -------------------------------------

struct MappingSample {
  Vector x;   // location in R^2
  int label;  // occupancy bit
};

// Robots fit a shared kernel-logistic occupancy field; each robot stores the
// weights of the kernels near its own trajectory plus the shared bias.
struct MappingScenario {
  int robots = 0;
  int n_centers = 0;
  double threshold = 0.0;
  std::uint64_t seed = 0;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double domain_w = 100.0, domain_h = 100.0;

  VariableLayout layout;  // var 0: bias, vars 1..m: kernel weights
  Network net{1, {}, Eigen::MatrixXd::Ones(1, 1)};
  IndexMaps maps;
  std::vector<Vector> centers;
  Vector true_weights;  // bias followed by kernel weights
  std::vector<std::vector<Vector>> trajectories;
  std::vector<std::vector<MappingSample>> train;
  std::vector<std::vector<MappingSample>> verify;

  int agent_dim(int agent) const { return layout.agent_dim(agent); }

  int total_unique_parameters() const { return layout.total_dim(); }

  int full_replication_parameters() const { return robots * layout.total_dim(); }

  int stored_parameters() const {
    int acc = 0;
    for (int a = 0; a < robots; ++a) acc += agent_dim(a);
    return acc;
  }

  // Feature vector over agent a's variables: leading 1 for the bias, then
  // the owned kernels k_s(x) = gamma1 exp(-gamma2 ||x - c_s||^2).
  Vector features(int agent, const Vector& x) const {
    const auto& subset = layout.agent_subset(agent);
    Vector phi(subset.size());
    for (std::size_t k = 0; k < subset.size(); ++k) {
      const VarId v = subset[k];
      phi(k) = v == 0 ? 1.0 : gamma1 * std::exp(-gamma2 * (x - centers[v - 1]).squaredNorm());
    }
    return phi;
  }

  // Occupancy logit under the generating weights (using all kernels).
  double true_logit(const Vector& x) const {
    double acc = true_weights(0);
    for (int s = 0; s < static_cast<int>(centers.size()); ++s)
      acc += true_weights(s + 1) * gamma1 * std::exp(-gamma2 * (x - centers[s]).squaredNorm());
    return acc;
  }

  DiagonalGaussian prior(int agent) const {
    const int d = agent_dim(agent);
    return {Vector::Constant(d, 0.01), Vector::Zero(d)};
  }

  MappingSample draw_train_sample(int agent, int round, std::uint64_t run_seed) const {
    Rng rng = Rng::keyed(run_seed, agent, round, kStreamTrain);
    return train[agent][rng.uniform_int(static_cast<int>(train[agent].size()))];
  }
};

// Mean L1 gap between predicted occupancy probability and the labels over an
// agent's verification set.
inline double mapping_error(const MappingScenario& s, int agent, const Vector& weights) {
  if (weights.size() != s.agent_dim(agent))
    throw LayoutError("mapping_error: weight dimension does not match agent subset");
  double acc = 0.0;
  for (const auto& sample : s.verify[agent])
    acc += std::abs(sigmoid(s.features(agent, sample.x).dot(weights)) - sample.label);
  return acc / static_cast<double>(s.verify[agent].size());
}

// Diagonal GVI observation model for one labelled point: Gauss-Hermite
// expectations of the logistic link over the scalar projection.
inline DiagonalGviModel mapping_gvi_model(const MappingScenario& s,
                                          const std::vector<MappingSample>& current,
                                          const GaussHermite& gh) {
  DiagonalGviModel model;
  model.expected_grad = [&s, &current, &gh](int agent, const DiagonalGaussian& under) {
    const Vector phi = s.features(agent, current[agent].x);
    const double mean = phi.dot(under.mu);
    const double var = (phi.array().square() / under.omega.array()).sum();
    const double es = gh.expect(mean, std::sqrt(var), [](double a) { return sigmoid(a); });
    return Vector((current[agent].label - es) * phi);
  };
  model.expected_neg_hess_diag = [&s, &current, &gh](int agent, const DiagonalGaussian& under) {
    const Vector phi = s.features(agent, current[agent].x);
    const double mean = phi.dot(under.mu);
    const double var = (phi.array().square() / under.omega.array()).sum();
    const double esp = gh.expect(mean, std::sqrt(var), [](double a) {
      const double sg = sigmoid(a);
      return sg * (1.0 - sg);
    });
    return Vector(esp * phi.array().square());
  };
  return model;
}

inline MappingScenario build_mapping(int robots, int n_centers, double threshold,
                                     std::uint64_t seed, int train_per_robot = 4000,
                                     int verify_per_robot = 600, double weight_scale = 3.5) {
  if (robots < 2 || n_centers < 4 || !(threshold > 0.0))
    throw ConfigError("build_mapping: need robots >= 2, centers >= 4, threshold > 0");
  MappingScenario s;
  s.robots = robots;
  s.n_centers = n_centers;
  s.threshold = threshold;
  s.seed = seed;

  // Domain scaled so robot loops tile it horizontally.
  s.domain_w = 50.0 * robots;
  s.domain_h = 100.0;

  // Kernel centers on a near-square lattice with exactly n_centers points.
  const double aspect = s.domain_w / s.domain_h;
  int gx = std::max(2, static_cast<int>(std::round(std::sqrt(n_centers * aspect))));
  int gy = std::max(2, (n_centers + gx - 1) / gx);
  const double step_x = s.domain_w / gx, step_y = s.domain_h / gy;
  for (int iy = 0; iy < gy && static_cast<int>(s.centers.size()) < n_centers; ++iy)
    for (int ix = 0; ix < gx && static_cast<int>(s.centers.size()) < n_centers; ++ix) {
      Vector c(2);
      c << (ix + 0.5) * step_x, (iy + 0.5) * step_y;
      s.centers.push_back(c);
    }
  const double spacing = std::min(step_x, step_y);
  s.gamma1 = 1.0;
  s.gamma2 = 0.5 / (spacing * spacing);

  // Robot trajectories: three concentric survey loops per robot, overlapping
  // the neighbors' slabs so shared kernels exist along the seams.
  const double loop_r = 0.45 * s.domain_w / robots;
  for (int r = 0; r < robots; ++r) {
    std::vector<Vector> traj;
    const double cx = (r + 0.5) * s.domain_w / robots;
    const double cy = 0.5 * s.domain_h;
    for (double scale : {1.0 / 3.0, 2.0 / 3.0, 1.0}) {
      for (int k = 0; k < 32; ++k) {
        const double th = 2.0 * std::numbers::pi * k / 32;
        Vector p(2);
        p << cx + scale * 1.35 * loop_r * std::cos(th), cy + scale * 2.2 * loop_r * std::sin(th);
        traj.push_back(p);
      }
    }
    s.trajectories.push_back(std::move(traj));
  }

  // Layout: bias first, then one scalar weight per kernel.
  s.layout.add_variable("bias", 1);
  for (int k = 0; k < n_centers; ++k) s.layout.add_variable("w" + std::to_string(k), 1);
  auto dist_to_traj = [&](int robot, const Vector& c) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : s.trajectories[robot]) best = std::min(best, (c - p).norm());
    return best;
  };
  for (int r = 0; r < robots; ++r) {
    std::vector<VarId> subset{0};
    for (int k = 0; k < n_centers; ++k)
      if (dist_to_traj(r, s.centers[k]) <= threshold) subset.push_back(k + 1);
    if (subset.size() < 2) throw CoverageError("robot " + std::to_string(r) + " owns no kernel");
    s.layout.set_agent_subset(r, subset);
  }
  s.layout.validate_cover();

  // Robots communicate iff they share a kernel (the bias does not count).
  std::vector<Edge> edges;
  for (int a = 0; a < robots; ++a)
    for (int b2 = a + 1; b2 < robots; ++b2) {
      auto shared = s.layout.shared_subset(a, b2);
      if (shared.size() > 1) edges.push_back({a, b2});
    }
  if (!is_connected(robots, edges))
    throw ConnectivityError("mapping ownership does not induce a connected network");
  s.net = Network::with_sinkhorn_weights(robots, std::move(edges));
  validate_marginal_consensus(s.layout, s.net);
  s.maps = IndexMaps::build(s.layout);

  // Generating weights: contiguous occupied blobs on the kernel lattice.
  Rng rng = Rng::keyed(seed, 0, 0, kStreamLabels);
  const double w0 = weight_scale;
  s.true_weights = Vector::Constant(n_centers + 1, -w0);
  s.true_weights(0) = -0.5 * w0;
  const int blobs = std::max(2, robots);
  for (int bidx = 0; bidx < blobs; ++bidx) {
    Vector c(2);
    c << rng.uniform(0.1 * s.domain_w, 0.9 * s.domain_w),
        rng.uniform(0.2 * s.domain_h, 0.8 * s.domain_h);
    const double radius = rng.uniform(1.5, 2.5) * spacing;
    for (int k = 0; k < n_centers; ++k)
      if ((s.centers[k] - c).norm() <= radius) s.true_weights(k + 1) = w0;
  }

  // Streaming-style datasets: points near the collecting robot's trajectory
  // (well inside the owned-kernel band), labels sampled from the generating
  // logistic model.
  auto draw_points = [&](int robot, int count, std::uint64_t tag) {
    Rng prng = Rng::keyed(seed, robot, 0, tag);
    const double reach = 0.6 * threshold;
    std::vector<MappingSample> out;
    out.reserve(count);
    while (static_cast<int>(out.size()) < count) {
      const auto& traj = s.trajectories[robot];
      const Vector& base = traj[prng.uniform_int(static_cast<int>(traj.size()))];
      Vector x(2);
      x << base(0) + prng.uniform(-reach, reach), base(1) + prng.uniform(-reach, reach);
      if (x(0) < 0.0 || x(0) > s.domain_w || x(1) < 0.0 || x(1) > s.domain_h) continue;
      const int label = prng.bernoulli(sigmoid(s.true_logit(x))) ? 1 : 0;
      out.push_back({x, label});
    }
    return out;
  };
  for (int r = 0; r < robots; ++r) {
    s.train.push_back(draw_points(r, train_per_robot, kStreamDataset));
    s.verify.push_back(draw_points(r, verify_per_robot, kStreamVerify));
  }
  return s;
}

}  // namespace smdnet
