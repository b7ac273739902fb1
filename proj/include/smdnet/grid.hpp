#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "smdnet/errors.hpp"
#include "smdnet/gaussian.hpp"
#include "smdnet/variables.hpp"

namespace smdnet {

struct GridAxis {
  VarId id = -1;
  double lo = 0.0;
  double hi = 1.0;
  int n = 2;

  double step() const { return (hi - lo) / (n - 1); }
  double value(int i) const { return lo + step() * i; }
  bool operator==(const GridAxis& o) const {
    return id == o.id && lo == o.lo && hi == o.hi && n == o.n;
  }
};

// Strictly positive probability masses on a rectangular lattice, stored and
// combined in the log domain so that geometric pooling of near-zero tails
// cannot underflow. Row-major, first axis slowest. Immutable value type.
class GridDensity {
 public:
  GridDensity(std::vector<GridAxis> axes, std::vector<double> log_unnormalized)
      : axes_(std::move(axes)), logp_(std::move(log_unnormalized)) {
    validate_axes();
    if (logp_.size() != static_cast<std::size_t>(cells()))
      throw LayoutError("grid mass array does not match axes");
    for (double v : logp_)
      if (!std::isfinite(v))
        throw NumericalError("grid density requires finite (strictly positive) mass");
    normalize();
  }

  static GridDensity uniform(std::vector<GridAxis> axes) {
    long n = 1;
    for (const auto& a : axes) n *= a.n;
    return GridDensity(std::move(axes), std::vector<double>(n, 0.0));
  }

  static GridDensity from_masses(std::vector<GridAxis> axes, const std::vector<double>& masses) {
    std::vector<double> lg(masses.size());
    for (std::size_t i = 0; i < masses.size(); ++i) {
      if (!(masses[i] > 0.0)) throw NumericalError("grid mass must be strictly positive");
      lg[i] = std::log(masses[i]);
    }
    return GridDensity(std::move(axes), std::move(lg));
  }

  // Discretize a Gaussian on the given lattice.
  static GridDensity from_gaussian(const GaussianDensity& g, std::vector<GridAxis> axes) {
    const Vector mu = g.mean();
    std::vector<double> lg(cells_of(axes));
    Vector x(axes.size());
    GridDensity tmp = GridDensity::uniform(axes);
    for (long c = 0; c < tmp.cells(); ++c) {
      tmp.node(c, x);
      const Vector d = x - mu;
      lg[c] = -0.5 * d.dot(g.omega() * d);
    }
    return GridDensity(std::move(axes), std::move(lg));
  }

  const std::vector<GridAxis>& axes() const { return axes_; }
  int ndim() const { return static_cast<int>(axes_.size()); }
  long cells() const { return cells_of(axes_); }

  double log_cell_volume() const {
    double v = 0.0;
    for (const auto& a : axes_) v += std::log(a.step());
    return v;
  }
  double cell_volume() const { return std::exp(log_cell_volume()); }

  double log_mass(long c) const { return logp_[c]; }
  double mass(long c) const { return std::exp(logp_[c]); }
  const std::vector<double>& log_masses() const { return logp_; }

  bool same_axes(const GridDensity& o) const { return axes_ == o.axes_; }

  // Fill x with the lattice coordinates of flat cell c.
  void node(long c, Vector& x) const {
    long r = c;
    for (int k = ndim() - 1; k >= 0; --k) {
      x(k) = axes_[k].value(static_cast<int>(r % axes_[k].n));
      r /= axes_[k].n;
    }
  }

  long flat_index(const std::vector<int>& ix) const {
    long c = 0;
    for (int k = 0; k < ndim(); ++k) c = c * axes_[k].n + ix[k];
    return c;
  }

  static long cells_of(const std::vector<GridAxis>& axes) {
    long n = 1;
    for (const auto& a : axes) n *= a.n;
    return n;
  }

 private:
  void validate_axes() const {
    if (axes_.empty()) throw LayoutError("grid needs at least one axis");
    for (std::size_t k = 0; k < axes_.size(); ++k) {
      if (axes_[k].n < 2 || !(axes_[k].hi > axes_[k].lo))
        throw LayoutError("grid axis must have n >= 2 and hi > lo");
      if (k > 0 && axes_[k].id <= axes_[k - 1].id)
        throw LayoutError("grid axes must be strictly increasing by variable id");
    }
  }

  void normalize() {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : logp_) m = std::max(m, v);
    double s = 0.0;
    for (double v : logp_) s += std::exp(v - m);
    const double log_z = m + std::log(s) + log_cell_volume();
    for (double& v : logp_) v -= log_z;
  }

  std::vector<GridAxis> axes_;
  std::vector<double> logp_;
};

namespace detail {

// Per-cell map from a full grid's flat index to the flat index of a grid over
// an axis subset (dropped axes contribute stride 0).
inline std::vector<long> subgrid_strides(const std::vector<GridAxis>& full,
                                         const std::vector<GridAxis>& sub) {
  std::vector<long> stride(full.size(), 0);
  std::vector<long> sub_stride(sub.size(), 1);
  for (int k = static_cast<int>(sub.size()) - 2; k >= 0; --k)
    sub_stride[k] = sub_stride[k + 1] * sub[k + 1].n;
  for (std::size_t k = 0; k < full.size(); ++k) {
    for (std::size_t s = 0; s < sub.size(); ++s) {
      if (sub[s].id == full[k].id) {
        if (!(sub[s] == full[k])) throw LayoutError("axis mismatch between grids");
        stride[k] = sub_stride[s];
      }
    }
  }
  return stride;
}

inline std::vector<long> full_to_sub_map(const GridDensity& full, const GridDensity& sub) {
  const auto stride = subgrid_strides(full.axes(), sub.axes());
  std::vector<long> map(full.cells());
  const int nd = full.ndim();
  for (long c = 0; c < full.cells(); ++c) {
    long r = c, s = 0;
    for (int k = nd - 1; k >= 0; --k) {
      s += stride[k] * (r % full.axes()[k].n);
      r /= full.axes()[k].n;
    }
    map[c] = s;
  }
  return map;
}

}  // namespace detail

// p_{t+1} proportional to exp(alpha * loglik) * prior.
inline GridDensity grid_bayes_update(const GridDensity& prior, const std::vector<double>& loglik,
                                     double alpha) {
  if (loglik.size() != static_cast<std::size_t>(prior.cells()))
    throw LayoutError("grid_bayes_update: log-likelihood field does not match grid");
  if (alpha < 0.0) throw LayoutError("grid_bayes_update: alpha must be nonnegative");
  std::vector<double> lg(prior.cells());
  for (long c = 0; c < prior.cells(); ++c) {
    if (!std::isfinite(loglik[c]))
      throw GradientBoundError("grid_bayes_update: non-finite log-likelihood value");
    lg[c] = prior.log_mass(c) + alpha * loglik[c];
  }
  return GridDensity(prior.axes(), std::move(lg));
}

struct GridMixResult {
  GridDensity density;
  double log_z;  // log of the normalization factor of the unnormalized pool
};

// Cellwise product of powers. log_z reports the normalization deficit used by
// the consensus-manifold tests (log_z <= 0, equality iff all inputs equal).
inline GridMixResult grid_geometric_mix(const std::vector<GridDensity>& densities,
                                        const std::vector<double>& weights) {
  if (densities.empty() || densities.size() != weights.size())
    throw LayoutError("grid_geometric_mix: need matching densities and weights");
  const GridDensity& first = densities[0];
  std::vector<double> lg(first.cells(), 0.0);
  for (std::size_t j = 0; j < densities.size(); ++j) {
    if (weights[j] < 0.0) throw LayoutError("grid_geometric_mix: negative weight");
    if (!first.same_axes(densities[j])) throw LayoutError("grid_geometric_mix: axis mismatch");
    if (weights[j] == 0.0) continue;
    for (long c = 0; c < first.cells(); ++c) {
      const double lw = densities[j].log_mass(c);
      if (!std::isfinite(lw))
        throw NumericalError("grid_geometric_mix: log-domain underflow on a weighted cell");
      lg[c] += weights[j] * lw;
    }
  }
  double m = -std::numeric_limits<double>::infinity();
  for (double v : lg) m = std::max(m, v);
  double s = 0.0;
  for (double v : lg) s += std::exp(v - m);
  const double log_z = m + std::log(s) + first.log_cell_volume();
  return {GridDensity(first.axes(), std::move(lg)), log_z};
}

inline GridDensity grid_marginalize(const GridDensity& p, const std::vector<VarId>& keep) {
  if (keep.empty()) throw LayoutError("grid_marginalize: keep set is empty");
  std::vector<VarId> keep_sorted = keep;
  std::sort(keep_sorted.begin(), keep_sorted.end());
  std::vector<GridAxis> sub;
  for (const auto& a : p.axes())
    if (std::binary_search(keep_sorted.begin(), keep_sorted.end(), a.id)) sub.push_back(a);
  if (sub.size() != keep_sorted.size())
    throw LayoutError("grid_marginalize: unknown variable in keep set");
  if (sub.size() == p.axes().size()) return p;

  GridDensity shell = GridDensity::uniform(sub);
  const auto map = detail::full_to_sub_map(p, shell);
  const long nsub = shell.cells();
  std::vector<double> mx(nsub, -std::numeric_limits<double>::infinity());
  for (long c = 0; c < p.cells(); ++c) mx[map[c]] = std::max(mx[map[c]], p.log_mass(c));
  std::vector<double> acc(nsub, 0.0);
  for (long c = 0; c < p.cells(); ++c) acc[map[c]] += std::exp(p.log_mass(c) - mx[map[c]]);
  double dropped_log_vol = p.log_cell_volume() - shell.log_cell_volume();
  std::vector<double> lg(nsub);
  for (long s = 0; s < nsub; ++s) lg[s] = mx[s] + std::log(acc[s]) + dropped_log_vol;
  return GridDensity(std::move(sub), std::move(lg));
}

// Conditional slice p(kept | given = lattice node), renormalized over kept.
inline GridDensity grid_condition_slice(const GridDensity& p, const std::vector<VarId>& given,
                                        const std::vector<int>& given_node_index) {
  if (given.empty() || given.size() >= p.axes().size())
    throw LayoutError("grid_condition_slice: given must be a nonempty proper subset");
  if (given.size() != given_node_index.size())
    throw LayoutError("grid_condition_slice: index count mismatch");
  std::vector<GridAxis> kept;
  std::vector<int> fixed(p.ndim(), -1);
  for (int k = 0; k < p.ndim(); ++k) {
    bool is_given = false;
    for (std::size_t s = 0; s < given.size(); ++s) {
      if (p.axes()[k].id == given[s]) {
        is_given = true;
        fixed[k] = given_node_index[s];
        if (fixed[k] < 0 || fixed[k] >= p.axes()[k].n)
          throw LayoutError("grid_condition_slice: node index out of range");
      }
    }
    if (!is_given) kept.push_back(p.axes()[k]);
  }
  if (kept.size() + given.size() != static_cast<std::size_t>(p.ndim()))
    throw LayoutError("grid_condition_slice: unknown given variable");
  GridDensity shell = GridDensity::uniform(kept);
  std::vector<double> lg(shell.cells());
  const int nd = p.ndim();
  std::vector<int> ix(nd, 0);
  for (long s = 0; s < shell.cells(); ++s) {
    long r = s;
    int kk = static_cast<int>(kept.size()) - 1;
    for (int k = nd - 1; k >= 0; --k) {
      if (fixed[k] >= 0) {
        ix[k] = fixed[k];
      } else {
        ix[k] = static_cast<int>(r % kept[kk].n);
        r /= kept[kk].n;
        --kk;
      }
    }
    lg[s] = p.log_mass(p.flat_index(ix));
  }
  return GridDensity(std::move(kept), std::move(lg));
}

// p~ = p_self(private | shared) * q(shared): cellwise
// log p_self - log marg_shared(p_self) + log q, exact in the discrete measure.
inline GridDensity grid_conditional_marginal_product(const GridDensity& p_self,
                                                     const GridDensity& q_shared) {
  std::vector<VarId> shared;
  for (const auto& a : q_shared.axes()) shared.push_back(a.id);
  bool all = q_shared.axes().size() == p_self.axes().size();
  if (all) {
    if (!p_self.same_axes(q_shared))
      throw LayoutError("grid_conditional_marginal_product: axis mismatch");
    return q_shared;
  }
  const GridDensity self_marg = grid_marginalize(p_self, shared);
  if (!self_marg.same_axes(q_shared))
    throw LayoutError("grid_conditional_marginal_product: axis mismatch");
  const auto map = detail::full_to_sub_map(p_self, self_marg);
  std::vector<double> lg(p_self.cells());
  for (long c = 0; c < p_self.cells(); ++c)
    lg[c] = p_self.log_mass(c) - self_marg.log_mass(map[c]) + q_shared.log_mass(map[c]);
  return GridDensity(p_self.axes(), std::move(lg));
}

inline double grid_kl(const GridDensity& p, const GridDensity& g) {
  if (!p.same_axes(g)) throw LayoutError("grid_kl: axis mismatch");
  double acc = 0.0;
  for (long c = 0; c < p.cells(); ++c)
    acc += std::exp(p.log_mass(c)) * (p.log_mass(c) - g.log_mass(c));
  return std::max(0.0, acc * p.cell_volume());
}

inline double grid_tv(const GridDensity& p, const GridDensity& g) {
  if (!p.same_axes(g)) throw LayoutError("grid_tv: axis mismatch");
  double acc = 0.0;
  for (long c = 0; c < p.cells(); ++c) acc += std::abs(p.mass(c) - g.mass(c));
  return 0.5 * acc * p.cell_volume();
}

// <psi, p> = integral of a bounded test function against the density.
inline double grid_inner(const std::vector<double>& psi, const GridDensity& p) {
  if (psi.size() != static_cast<std::size_t>(p.cells()))
    throw LayoutError("grid_inner: field does not match grid");
  double acc = 0.0;
  for (long c = 0; c < p.cells(); ++c) acc += psi[c] * p.mass(c);
  return acc * p.cell_volume();
}

// Arithmetic mixture in the linear domain (used for running averages p_bar).
inline GridDensity grid_linear_mix(const std::vector<GridDensity>& densities,
                                   const std::vector<double>& weights) {
  if (densities.empty() || densities.size() != weights.size())
    throw LayoutError("grid_linear_mix: need matching densities and weights");
  std::vector<double> m(densities[0].cells(), 0.0);
  for (std::size_t j = 0; j < densities.size(); ++j) {
    if (!densities[0].same_axes(densities[j])) throw LayoutError("grid_linear_mix: axis mismatch");
    for (long c = 0; c < densities[0].cells(); ++c) m[c] += weights[j] * densities[j].mass(c);
  }
  return GridDensity::from_masses(densities[0].axes(), m);
}

// Default oracle lattices: +-8 sigma of the widest involved Gaussian,
// 401 points per axis in 1D, 161 in 2D, 61 in 3D. The grid oracle indexes
// axes by variable id, so the densities must be over scalar variables.
inline std::vector<GridAxis> oracle_axes(const std::vector<GaussianDensity>& involved,
                                         int points_override = 0) {
  if (involved.empty()) throw LayoutError("oracle_axes: no densities");
  const int d = involved[0].dim();
  const auto& vars = involved[0].vars();
  for (const auto& v : vars)
    if (v.dim != 1) throw LayoutError("oracle_axes: grid oracle requires scalar variables");
  const int pts = points_override > 0 ? points_override : (d == 1 ? 401 : (d == 2 ? 161 : 61));
  std::vector<GridAxis> axes(d);
  bool first = true;
  for (const auto& g : involved) {
    if (g.dim() != d) throw LayoutError("oracle_axes: dimension mismatch");
    const Vector mu = g.mean();
    const Matrix cov = g.covariance();
    for (int k = 0; k < d; ++k) {
      const double s = std::sqrt(cov(k, k));
      if (first) {
        axes[k] = {vars[k].id, mu(k) - 8.0 * s, mu(k) + 8.0 * s, pts};
      } else {
        axes[k].lo = std::min(axes[k].lo, mu(k) - 8.0 * s);
        axes[k].hi = std::max(axes[k].hi, mu(k) + 8.0 * s);
      }
    }
    first = false;
  }
  return axes;
}

}  // namespace smdnet
