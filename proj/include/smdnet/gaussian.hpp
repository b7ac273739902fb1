#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "smdnet/errors.hpp"
#include "smdnet/variables.hpp"

namespace smdnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline void check_symmetric(const Matrix& m, const char* what) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw NumericalError(std::string(what) + ": matrix is not symmetric");
}

// Floor check on the spectrum; violations are errors, never repaired.
inline void check_positive_definite(const Matrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 1e-12 * std::max(1.0, hi)))
    throw NumericalError(std::string(what) + ": information matrix is not positive definite");
}

}  // namespace detail

// Multivariate normal stored in information form (Omega, Omega*mu) over an
// ordered set of variables. Blocks are kept in ascending variable-id order,
// matching the global VariableLayout order, so densities coming from
// different agents combine block-wise. Immutable value type.
class GaussianDensity {
 public:
  GaussianDensity(std::vector<Variable> vars, Matrix omega, Vector eta)
      : vars_(std::move(vars)), omega_(std::move(omega)), eta_(std::move(eta)) {
    validate();
    omega_ = ((omega_ + omega_.transpose()) * 0.5).eval();
  }

  static GaussianDensity from_moments(std::vector<Variable> vars, const Vector& mean,
                                      const Matrix& cov) {
    detail::check_symmetric(cov, "from_moments");
    Matrix omega = cov.llt().solve(Matrix::Identity(cov.rows(), cov.cols()));
    omega = ((omega + omega.transpose()) * 0.5).eval();
    return GaussianDensity(std::move(vars), omega, omega * mean);
  }

  // Accepts blocks in arbitrary variable order and permutes them into the
  // canonical ascending-id order.
  static GaussianDensity from_ordered(const std::vector<Variable>& vars, const Matrix& omega,
                                      const Vector& eta) {
    std::vector<int> order(vars.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return vars[a].id < vars[b].id; });
    std::vector<int> src_offset(vars.size(), 0);
    int off = 0;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      src_offset[i] = off;
      off += vars[i].dim;
    }
    std::vector<int> perm;
    perm.reserve(off);
    std::vector<Variable> sorted;
    sorted.reserve(vars.size());
    for (int s : order) {
      sorted.push_back(vars[s]);
      for (int k = 0; k < vars[s].dim; ++k) perm.push_back(src_offset[s] + k);
    }
    Matrix om(off, off);
    Vector et(off);
    for (int r = 0; r < off; ++r) {
      et(r) = eta(perm[r]);
      for (int c = 0; c < off; ++c) om(r, c) = omega(perm[r], perm[c]);
    }
    return GaussianDensity(std::move(sorted), std::move(om), std::move(et));
  }

  const std::vector<Variable>& vars() const { return vars_; }
  const Matrix& omega() const { return omega_; }
  const Vector& eta() const { return eta_; }
  int dim() const { return static_cast<int>(omega_.rows()); }

  Vector mean() const {
    Vector mu = omega_.llt().solve(eta_);
    if (!mu.allFinite()) throw NumericalError("mean is not finite");
    return mu;
  }

  Matrix covariance() const {
    return omega_.llt().solve(Matrix::Identity(dim(), dim()));
  }

  double log_det_omega() const {
    Eigen::LLT<Matrix> llt(omega_);
    return 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  }

  double log_pdf(const Vector& x) const {
    const Vector d = x - mean();
    return 0.5 * log_det_omega() - 0.5 * dim() * std::log(2.0 * std::numbers::pi) -
           0.5 * d.dot(omega_ * d);
  }

  bool same_vars(const GaussianDensity& other) const {
    if (vars_.size() != other.vars_.size()) return false;
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i].id != other.vars_[i].id || vars_[i].dim != other.vars_[i].dim) return false;
    return true;
  }

  bool has_var(VarId id) const {
    for (const auto& v : vars_)
      if (v.id == id) return true;
    return false;
  }

  // Flat indices of a subset of variables (subset given as sorted ids).
  std::vector<int> indices_of(const std::vector<VarId>& subset) const {
    std::vector<int> idx;
    std::size_t s = 0;
    int off = 0;
    for (const auto& v : vars_) {
      if (s < subset.size() && subset[s] == v.id) {
        for (int k = 0; k < v.dim; ++k) idx.push_back(off + k);
        ++s;
      } else if (s < subset.size() && subset[s] < v.id) {
        throw LayoutError("subset variable not present in density");
      }
      off += v.dim;
    }
    if (s != subset.size()) throw LayoutError("subset variable not present in density");
    return idx;
  }

 private:
  void validate() const {
    if (vars_.empty()) throw LayoutError("density needs at least one variable");
    int d = 0;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i].dim <= 0) throw LayoutError("variable with non-positive dim");
      if (i > 0 && vars_[i].id <= vars_[i - 1].id)
        throw LayoutError("density variables must be strictly increasing by id");
      d += vars_[i].dim;
    }
    if (omega_.rows() != d || omega_.cols() != d || eta_.size() != d)
      throw LayoutError("information matrix/vector size does not match variable dims");
    detail::check_symmetric(omega_, "GaussianDensity");
    detail::check_positive_definite(omega_, "GaussianDensity");
  }

  std::vector<Variable> vars_;
  Matrix omega_;
  Vector eta_;
};

// Linear-Gaussian map from an assignment of the `given` variables to a
// density over the remaining ones: precision omega_kk, linear term
// eta_k - omega_kg * x_given.
struct ConditionalGaussian {
  std::vector<Variable> kept;
  std::vector<Variable> given;
  Matrix omega_kk;
  Matrix omega_kg;
  Vector eta_k;

  GaussianDensity at(const Vector& given_values) const {
    if (given_values.size() != omega_kg.cols())
      throw LayoutError("conditioning value has wrong dimension");
    return GaussianDensity(kept, omega_kk, eta_k - omega_kg * given_values);
  }
};

inline double kl_divergence(const GaussianDensity& p, const GaussianDensity& g) {
  if (!p.same_vars(g)) throw LayoutError("kl_divergence: variable sets differ");
  const int d = p.dim();
  const Matrix cov_p = p.covariance();
  const Vector dmu = g.mean() - p.mean();
  const double trace = (g.omega() * cov_p).trace();
  const double quad = dmu.dot(g.omega() * dmu);
  const double logdet = p.log_det_omega() - g.log_det_omega();
  const double kl = 0.5 * (trace + quad - d + logdet);
  return std::max(0.0, kl);
}

// Weighted geometric pooling. Closed under Gaussians: information parameters
// combine additively. Weights summing to less than one are accepted (the
// sub-stochastic rows arising when a mixing row is restricted to a variable
// subgraph); the same additive rule is applied.
inline GaussianDensity geometric_mean(const std::vector<GaussianDensity>& densities,
                                      const std::vector<double>& weights) {
  if (densities.empty() || densities.size() != weights.size())
    throw LayoutError("geometric_mean: need matching densities and weights");
  for (double w : weights)
    if (w < 0.0) throw LayoutError("geometric_mean: negative weight");
  Matrix omega = Matrix::Zero(densities[0].dim(), densities[0].dim());
  Vector eta = Vector::Zero(densities[0].dim());
  for (std::size_t j = 0; j < densities.size(); ++j) {
    if (!densities[0].same_vars(densities[j]))
      throw LayoutError("geometric_mean: variable sets differ");
    omega += weights[j] * densities[j].omega();
    eta += weights[j] * densities[j].eta();
  }
  return GaussianDensity(densities[0].vars(), std::move(omega), std::move(eta));
}

// Schur-complement marginalization in information form.
inline GaussianDensity marginalize(const GaussianDensity& p, const std::vector<VarId>& keep) {
  if (keep.empty()) throw LayoutError("marginalize: keep set is empty");
  std::vector<VarId> keep_sorted = keep;
  std::sort(keep_sorted.begin(), keep_sorted.end());
  if (keep_sorted.size() == p.vars().size()) {
    (void)p.indices_of(keep_sorted);  // id check
    return p;
  }
  const std::vector<int> ki = p.indices_of(keep_sorted);
  std::vector<int> di;
  {
    std::vector<bool> is_kept(p.dim(), false);
    for (int i : ki) is_kept[i] = true;
    for (int i = 0; i < p.dim(); ++i)
      if (!is_kept[i]) di.push_back(i);
  }
  const Matrix o_kk = p.omega()(ki, ki);
  const Matrix o_kd = p.omega()(ki, di);
  const Matrix o_dd = p.omega()(di, di);
  const Vector e_k = p.eta()(ki);
  const Vector e_d = p.eta()(di);
  Eigen::LLT<Matrix> llt(o_dd);
  const Matrix omega = o_kk - o_kd * llt.solve(o_kd.transpose());
  const Vector eta = e_k - o_kd * llt.solve(e_d);
  std::vector<Variable> kv;
  for (const auto& v : p.vars())
    if (std::binary_search(keep_sorted.begin(), keep_sorted.end(), v.id)) kv.push_back(v);
  return GaussianDensity(std::move(kv), omega, eta);
}

inline ConditionalGaussian condition(const GaussianDensity& p, const std::vector<VarId>& given) {
  if (given.empty()) throw LayoutError("condition: given set is empty");
  std::vector<VarId> given_sorted = given;
  std::sort(given_sorted.begin(), given_sorted.end());
  if (given_sorted.size() >= p.vars().size())
    throw LayoutError("condition: given set must be a proper subset");
  const std::vector<int> gi = p.indices_of(given_sorted);
  std::vector<int> ki;
  {
    std::vector<bool> is_given(p.dim(), false);
    for (int i : gi) is_given[i] = true;
    for (int i = 0; i < p.dim(); ++i)
      if (!is_given[i]) ki.push_back(i);
  }
  ConditionalGaussian out;
  for (const auto& v : p.vars()) {
    if (std::binary_search(given_sorted.begin(), given_sorted.end(), v.id))
      out.given.push_back(v);
    else
      out.kept.push_back(v);
  }
  out.omega_kk = p.omega()(ki, ki);
  out.omega_kg = p.omega()(ki, gi);
  out.eta_k = p.eta()(ki);
  return out;
}

// Inverse of the condition/marginalize split: the returned joint has
// conditional `cond` exactly and marginal over the given variables equal to
// `marg` exactly (chain rule, exact in information form).
inline GaussianDensity reconstruct_joint(const ConditionalGaussian& cond,
                                         const GaussianDensity& marg) {
  if (marg.vars().size() != cond.given.size())
    throw LayoutError("reconstruct_joint: marginal variables differ from given set");
  for (std::size_t i = 0; i < cond.given.size(); ++i)
    if (marg.vars()[i].id != cond.given[i].id || marg.vars()[i].dim != cond.given[i].dim)
      throw LayoutError("reconstruct_joint: marginal variables differ from given set");

  Eigen::LLT<Matrix> llt(cond.omega_kk);
  const Matrix gg_fill = cond.omega_kg.transpose() * llt.solve(cond.omega_kg);
  const Vector g_fill = cond.omega_kg.transpose() * llt.solve(cond.eta_k);

  std::vector<Variable> all = cond.kept;
  all.insert(all.end(), cond.given.begin(), cond.given.end());
  const int dk = static_cast<int>(cond.omega_kk.rows());
  const int dg = static_cast<int>(marg.dim());
  Matrix omega(dk + dg, dk + dg);
  omega.topLeftCorner(dk, dk) = cond.omega_kk;
  omega.topRightCorner(dk, dg) = cond.omega_kg;
  omega.bottomLeftCorner(dg, dk) = cond.omega_kg.transpose();
  omega.bottomRightCorner(dg, dg) = marg.omega() + gg_fill;
  Vector eta(dk + dg);
  eta.head(dk) = cond.eta_k;
  eta.tail(dg) = marg.eta() + g_fill;
  return GaussianDensity::from_ordered(all, omega, eta);
}

// The message-merging primitive p~_{ji}: the self-conditional over private
// variables times the neighbor marginal over the shared ones.
inline GaussianDensity conditional_marginal_product(const GaussianDensity& p_self,
                                                    const GaussianDensity& p_neighbor_marginal) {
  std::vector<VarId> shared;
  for (const auto& v : p_neighbor_marginal.vars()) {
    if (!p_self.has_var(v.id))
      throw LayoutError("conditional_marginal_product: shared set not inside self set");
    shared.push_back(v.id);
  }
  if (shared.size() == p_self.vars().size()) return p_neighbor_marginal;
  return reconstruct_joint(condition(p_self, shared), p_neighbor_marginal);
}

namespace detail {

// Trapezoid-free lattice sum of 0.5*|p-g| over a shared box. Supports the
// desk-scale dims the oracle certifies (<= 3).
inline double tv_lattice(const GaussianDensity& p, const GaussianDensity& g, int n_per_axis) {
  const int d = p.dim();
  const Vector mu_p = p.mean(), mu_g = g.mean();
  const Matrix cov_p = p.covariance(), cov_g = g.covariance();
  Vector lo(d), hi(d);
  for (int k = 0; k < d; ++k) {
    const double sp = std::sqrt(cov_p(k, k)), sg = std::sqrt(cov_g(k, k));
    lo(k) = std::min(mu_p(k) - 6.0 * sp, mu_g(k) - 6.0 * sg);
    hi(k) = std::max(mu_p(k) + 6.0 * sp, mu_g(k) + 6.0 * sg);
  }
  double cell = 1.0;
  Vector step(d);
  for (int k = 0; k < d; ++k) {
    step(k) = (hi(k) - lo(k)) / (n_per_axis - 1);
    cell *= step(k);
  }
  const double lp_norm = 0.5 * p.log_det_omega() - 0.5 * d * std::log(2.0 * std::numbers::pi);
  const double lg_norm = 0.5 * g.log_det_omega() - 0.5 * d * std::log(2.0 * std::numbers::pi);
  long total = 1;
  for (int k = 0; k < d; ++k) total *= n_per_axis;
  Vector x(d);
  double acc = 0.0;
  std::vector<int> ix(d, 0);
  for (long c = 0; c < total; ++c) {
    long r = c;
    for (int k = d - 1; k >= 0; --k) {
      ix[k] = static_cast<int>(r % n_per_axis);
      r /= n_per_axis;
    }
    for (int k = 0; k < d; ++k) x(k) = lo(k) + step(k) * ix[k];
    const Vector dp = x - mu_p, dg = x - mu_g;
    const double vp = std::exp(lp_norm - 0.5 * dp.dot(p.omega() * dp));
    const double vg = std::exp(lg_norm - 0.5 * dg.dot(g.omega() * dg));
    acc += std::abs(vp - vg);
  }
  return 0.5 * acc * cell;
}

}  // namespace detail

// TV between Gaussians has no general closed form; quadrature on an
// automatically sized grid (+-6 sigma, >= 101 points per axis) with a
// Richardson-style refinement check. Declared accuracy 1e-4. Only used in
// tests and logged metrics, never in estimator hot paths.
inline double tv_distance(const GaussianDensity& p, const GaussianDensity& g) {
  if (!p.same_vars(g)) throw LayoutError("tv_distance: variable sets differ");
  if (p.dim() > 3) throw NumericalError("tv_distance: quadrature limited to 3 dims");
  int n = 101;
  double coarse = detail::tv_lattice(p, g, n);
  while (n < 801) {
    const int n2 = 2 * n - 1;
    const double fine = detail::tv_lattice(p, g, n2);
    if (std::abs(fine - coarse) < 0.5e-4) return std::min(1.0, fine);
    coarse = fine;
    n = n2;
  }
  return std::min(1.0, coarse);
}

}  // namespace smdnet
