#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "smdnet/errors.hpp"
#include "smdnet/rng.hpp"
#include "smdnet/variables.hpp"

namespace smdnet {

using Edge = std::pair<int, int>;  // undirected, stored with first < second

inline std::vector<std::vector<int>> adjacency_lists(int n, const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> adj(n);
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n || a == b) throw LayoutError("bad edge");
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return adj;
}

inline bool is_connected(int n, const std::vector<Edge>& edges,
                         const std::vector<int>* subset = nullptr) {
  std::vector<int> nodes;
  if (subset) {
    nodes = *subset;
  } else {
    nodes.resize(n);
    for (int i = 0; i < n; ++i) nodes[i] = i;
  }
  if (nodes.empty()) return true;
  std::set<int> in_set(nodes.begin(), nodes.end());
  const auto adj = adjacency_lists(n, edges);
  std::set<int> seen;
  std::queue<int> q;
  q.push(nodes[0]);
  seen.insert(nodes[0]);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (in_set.count(v) && !seen.count(v)) {
        seen.insert(v);
        q.push(v);
      }
    }
  }
  return seen.size() == nodes.size();
}

// Alternating row/column normalization with per-sweep symmetrization, run
// until the worst row/column sum deviates from 1 by less than tol.
inline Eigen::MatrixXd sinkhorn_normalize(Eigen::MatrixXd m, double tol = 1e-10,
                                          int max_iter = 10000) {
  const int n = static_cast<int>(m.rows());
  if (m.cols() != n) throw LayoutError("sinkhorn_normalize: matrix must be square");
  if (((m - m.transpose()).cwiseAbs().maxCoeff()) > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw LayoutError("sinkhorn_normalize: input must be symmetric");
  for (int i = 0; i < n; ++i) {
    if (m(i, i) <= 0.0) throw LayoutError("sinkhorn_normalize: diagonal must be positive");
    for (int j = 0; j < n; ++j)
      if (m(i, j) < 0.0) throw LayoutError("sinkhorn_normalize: entries must be nonnegative");
  }
  double residual = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd r = m.rowwise().sum();
    const Eigen::VectorXd c = m.colwise().sum();
    residual = std::max((r.array() - 1.0).abs().maxCoeff(), (c.array() - 1.0).abs().maxCoeff());
    if (residual < tol) return m;
    for (int i = 0; i < n; ++i) m.row(i) /= r(i);
    const Eigen::VectorXd c2 = m.colwise().sum();
    for (int j = 0; j < n; ++j) m.col(j) /= c2(j);
    m = ((m + m.transpose()) * 0.5).eval();
  }
  throw ConvergenceError("sinkhorn_normalize: no convergence, residual " +
                         std::to_string(residual));
}

// Agent communication graph with a symmetric doubly stochastic weight matrix.
class Network {
 public:
  Network(int n, std::vector<Edge> edges, Eigen::MatrixXd weights)
      : n_(n), edges_(std::move(edges)), weights_(std::move(weights)) {
    validate();
  }

  // Lazy-adjacency seed (adjacency + identity keeps the diagonal positive)
  // followed by Sinkhorn normalization.
  static Network with_sinkhorn_weights(int n, std::vector<Edge> edges) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    for (auto [a, b] : edges) {
      m(a, b) = 1.0;
      m(b, a) = 1.0;
    }
    Eigen::MatrixXd w = sinkhorn_normalize(std::move(m));
    return Network(n, std::move(edges), std::move(w));
  }

  int size() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Eigen::MatrixXd& weights() const { return weights_; }

  bool has_edge(int i, int j) const {
    if (i == j) return true;
    const Edge e{std::min(i, j), std::max(i, j)};
    return std::find(edges_.begin(), edges_.end(), e) != edges_.end();
  }

  // Neighbors excluding self.
  const std::vector<int>& neighbors(int i) const { return adj_[i]; }

  // Closed neighborhood V_i (self first, then neighbors in index order).
  std::vector<int> closed_neighborhood(int i) const {
    std::vector<int> out{i};
    out.insert(out.end(), adj_[i].begin(), adj_[i].end());
    return out;
  }

 private:
  void validate() {
    if (weights_.rows() != n_ || weights_.cols() != n_)
      throw LayoutError("Network: weight matrix size mismatch");
    const Eigen::MatrixXd& a = weights_;
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10)
      throw LayoutError("Network: weights must be symmetric");
    for (int i = 0; i < n_; ++i) {
      if (std::abs(a.row(i).sum() - 1.0) > 1e-10 || std::abs(a.col(i).sum() - 1.0) > 1e-10)
        throw LayoutError("Network: weights must be doubly stochastic");
      if (!(a(i, i) > 0.0)) throw LayoutError("Network: diagonal weights must be positive");
    }
    adj_ = adjacency_lists(n_, edges_);
    for (auto& nb : adj_) std::sort(nb.begin(), nb.end());
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        const bool supported = (i == j) || has_edge(i, j);
        if (supported != (a(i, j) > 0.0))
          throw LayoutError("Network: weight support must match the edge set");
      }
    if (!is_connected(n_, edges_)) throw ConnectivityError("Network: graph is disconnected");
  }

  int n_;
  std::vector<Edge> edges_;
  Eigen::MatrixXd weights_;
  std::vector<std::vector<int>> adj_;
};

// Mixing matrix restricted to the agents estimating one variable: off-diagonal
// entries are kept, and the weight mass leaving the subset is folded into the
// diagonal, which keeps the matrix doubly stochastic.
inline Eigen::MatrixXd restricted_weights(const Network& net, const std::vector<int>& subset) {
  const int m = static_cast<int>(subset.size());
  const Eigen::MatrixXd& a = net.weights();
  Eigen::MatrixXd ax = Eigen::MatrixXd::Zero(m, m);
  for (int r = 0; r < m; ++r) {
    double inside = 0.0;
    for (int c = 0; c < m; ++c) {
      if (r != c) {
        ax(r, c) = a(subset[r], subset[c]);
        inside += ax(r, c);
      }
    }
    ax(r, r) = 1.0 - inside;
  }
  return ax;
}

// Second-largest singular value of the (restricted) weight matrix.
inline double contraction_rate(const Network& net, const std::vector<int>* restricted_to = nullptr) {
  Eigen::MatrixXd a;
  if (restricted_to) {
    if (!is_connected(net.size(), net.edges(), restricted_to))
      throw ConnectivityError("contraction_rate: restricted subgraph is disconnected");
    a = restricted_weights(net, *restricted_to);
  } else {
    a = net.weights();
  }
  if (a.rows() == 1) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()(1);
}

// Agents and induced edges per variable (V(x), E(x)).
struct VariableSubgraphIndex {
  std::map<VarId, std::vector<int>> agents;
  std::map<VarId, std::vector<Edge>> edges;
};

// Builds V(x) = {i : x in X_i} and the induced edge sets; errors with the
// variable's name if any induced subgraph is disconnected.
inline VariableSubgraphIndex validate_marginal_consensus(const VariableLayout& layout,
                                                         const Network& net) {
  if (layout.num_agents() != net.size())
    throw LayoutError("validate_marginal_consensus: layout and network disagree on agent count");
  VariableSubgraphIndex index;
  for (VarId v = 0; v < layout.num_variables(); ++v) {
    std::vector<int> owners = layout.owners(v);
    std::vector<Edge> induced;
    for (const Edge& e : net.edges()) {
      const bool a = std::binary_search(owners.begin(), owners.end(), e.first);
      const bool b = std::binary_search(owners.begin(), owners.end(), e.second);
      if (a && b) induced.push_back(e);
    }
    if (!owners.empty() && !is_connected(net.size(), induced, &owners))
      throw ConnectivityError("variable '" + layout.variable(v).name +
                              "' is estimated by a disconnected agent set");
    index.agents[v] = std::move(owners);
    index.edges[v] = std::move(induced);
  }
  return index;
}

// ---- Topology generators ----------------------------------------------

inline std::vector<Edge> line_edges(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return e;
}

inline std::vector<Edge> ring_edges(int n) {
  std::vector<Edge> e = line_edges(n);
  if (n > 2) e.push_back({0, n - 1});
  return e;
}

inline std::vector<Edge> star_edges(int n) {
  std::vector<Edge> e;
  for (int i = 1; i < n; ++i) e.push_back({0, i});
  return e;
}

inline std::vector<Edge> complete_edges(int n) {
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e.push_back({i, j});
  return e;
}

inline std::vector<Edge> erdos_renyi_edges(int n, double p, std::uint64_t seed,
                                           int max_tries = 200) {
  Rng rng(Rng::mix(seed, 0x4552u));
  for (int t = 0; t < max_tries; ++t) {
    std::vector<Edge> e;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.bernoulli(p)) e.push_back({i, j});
    if (is_connected(n, e)) return e;
  }
  throw ConnectivityError("erdos_renyi_edges: no connected sample within retry budget");
}

// Line graph plus a seeded shuffle of the remaining non-edges, cut to the
// requested edge count. Covers the 7..27-edge sweep on 8 nodes.
inline std::vector<Edge> interpolated_edges(int n, int target_edges, std::uint64_t seed) {
  std::vector<Edge> e = line_edges(n);
  const int full = n * (n - 1) / 2;
  if (target_edges < static_cast<int>(e.size()) || target_edges > full)
    throw LayoutError("interpolated_edges: edge count out of range");
  std::vector<Edge> extra;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (j != i + 1) extra.push_back({i, j});
  Rng rng(Rng::mix(seed, 0x4954u));
  for (int i = static_cast<int>(extra.size()) - 1; i > 0; --i)
    std::swap(extra[i], extra[rng.uniform_int(i + 1)]);
  for (int k = 0; static_cast<int>(e.size()) < target_edges; ++k) e.push_back(extra[k]);
  std::sort(e.begin(), e.end());
  return e;
}

inline std::vector<Edge> topology_edges(const std::string& kind, int n, std::uint64_t seed,
                                        int target_edges = 0, double er_prob = 0.4) {
  if (kind == "line") return line_edges(n);
  if (kind == "ring") return ring_edges(n);
  if (kind == "star") return star_edges(n);
  if (kind == "complete") return complete_edges(n);
  if (kind == "erdos-renyi") return erdos_renyi_edges(n, er_prob, seed);
  if (kind == "interpolated") return interpolated_edges(n, target_edges, seed);
  throw ConfigError("unknown topology kind '" + kind + "'");
}

}  // namespace smdnet
