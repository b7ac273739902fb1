#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "smdnet/errors.hpp"
#include "smdnet/gaussian.hpp"
#include "smdnet/network.hpp"
#include "smdnet/rng.hpp"
#include "smdnet/variables.hpp"

namespace smdnet {

// Linear observation z = H x + w with w ~ N(0, V^{-1}); V is the measurement
// information matrix.
struct LinearGaussianModel {
  Matrix h;
  Matrix v;

  LinearGaussianModel(Matrix h_in, Matrix v_in) : h(std::move(h_in)), v(std::move(v_in)) {
    detail::check_symmetric(v, "LinearGaussianModel");
    detail::check_positive_definite(v, "LinearGaussianModel");
    if (v.rows() != h.rows()) throw LayoutError("LinearGaussianModel: H and V disagree");
  }

  double log_likelihood(const Vector& x, const Vector& z) const {
    const Vector r = z - h * x;
    const double logdet = 2.0 * Matrix(v.llt().matrixL()).diagonal().array().log().sum();
    return 0.5 * logdet - 0.5 * z.size() * std::log(2.0 * std::numbers::pi) -
           0.5 * r.dot(v * r);
  }
};

// Exponentiated Bayes update: the exponent alpha is folded into the
// measurement information, Omega += alpha H^T V H, eta += alpha H^T V z.
inline GaussianDensity linear_gaussian_posterior(const GaussianDensity& prior,
                                                 const LinearGaussianModel& model,
                                                 const Vector& z, double alpha = 1.0) {
  if (model.h.cols() != prior.dim())
    throw LayoutError("linear_gaussian_posterior: H does not match state dim");
  if (z.size() != model.h.rows())
    throw LayoutError("linear_gaussian_posterior: measurement size mismatch");
  if (alpha < 0.0) throw LayoutError("linear_gaussian_posterior: alpha must be nonnegative");
  const Matrix omega = prior.omega() + alpha * model.h.transpose() * model.v * model.h;
  const Vector eta = prior.eta() + alpha * model.h.transpose() * model.v * z;
  return GaussianDensity(prior.vars(), omega, eta);
}

// One full marginal-mixing step at agent i: merge each neighbor's marginal
// over the shared variables with the self conditional, then pool
// geometrically with the agent's weight row. The self term enters as the
// density itself.
inline GaussianDensity gaussian_marginal_mix(
    const GaussianDensity& self, const std::map<int, GaussianDensity>& neighbor_marginals,
    const std::map<int, double>& weights, int self_id) {
  std::vector<GaussianDensity> merged;
  std::vector<double> w;
  const auto self_w = weights.find(self_id);
  if (self_w == weights.end())
    throw LayoutError("gaussian_marginal_mix: missing self weight");
  merged.push_back(self);
  w.push_back(self_w->second);
  for (const auto& [j, marg] : neighbor_marginals) {
    const auto wj = weights.find(j);
    if (wj == weights.end()) throw LayoutError("gaussian_marginal_mix: missing neighbor weight");
    merged.push_back(conditional_marginal_product(self, marg));
    w.push_back(wj->second);
  }
  return geometric_mean(merged, w);
}

// ---- Gaussian variational inference ------------------------------------

// Twice-differentiable log-likelihood evaluator for a fixed observation.
struct TwiceDifferentiable {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

struct ExpectationRule {
  enum class Kind { Analytic, Unscented, MonteCarlo };
  Kind kind = Kind::Unscented;
  int mc_samples = 10000;
  std::uint64_t mc_seed = 0;
  // Analytic rule: the model supplies the expectations directly.
  std::function<Vector(const Vector& mean, const Matrix& cov)> analytic_gradient;
  std::function<Matrix(const Vector& mean, const Matrix& cov)> analytic_hessian;

  static ExpectationRule unscented() { return {}; }
  static ExpectationRule monte_carlo(int samples, std::uint64_t seed) {
    ExpectationRule r;
    r.kind = Kind::MonteCarlo;
    r.mc_samples = samples;
    r.mc_seed = seed;
    return r;
  }
};

namespace detail {

// 2d+1 sigma points with the standard small-spread parameterization
// (alpha = 1e-3, kappa = 0).
inline void unscented_points(const Vector& mean, const Matrix& cov, std::vector<Vector>& pts,
                             std::vector<double>& wts) {
  const int d = static_cast<int>(mean.size());
  const double spread = 1e-3;
  const double lambda = spread * spread * d - d;
  const Matrix scaled = (d + lambda) * cov;
  Eigen::LLT<Matrix> llt(scaled);
  if (llt.info() != Eigen::Success)
    throw NumericalError("unscented_points: covariance not positive definite");
  const Matrix root = llt.matrixL();
  pts.clear();
  wts.clear();
  pts.push_back(mean);
  wts.push_back(lambda / (d + lambda));
  for (int k = 0; k < d; ++k) {
    pts.push_back(mean + root.col(k));
    wts.push_back(0.5 / (d + lambda));
    pts.push_back(mean - root.col(k));
    wts.push_back(0.5 / (d + lambda));
  }
}

}  // namespace detail

inline Vector expected_gradient(const TwiceDifferentiable& loglik, const GaussianDensity& under,
                                const ExpectationRule& rule) {
  const Vector mean = under.mean();
  const Matrix cov = under.covariance();
  switch (rule.kind) {
    case ExpectationRule::Kind::Analytic:
      return rule.analytic_gradient(mean, cov);
    case ExpectationRule::Kind::Unscented: {
      std::vector<Vector> pts;
      std::vector<double> wts;
      detail::unscented_points(mean, cov, pts, wts);
      Vector acc = Vector::Zero(mean.size());
      for (std::size_t k = 0; k < pts.size(); ++k) acc += wts[k] * loglik.gradient(pts[k]);
      return acc;
    }
    case ExpectationRule::Kind::MonteCarlo: {
      Rng rng(Rng::mix(rule.mc_seed, 0x6d63u));
      const Matrix root = cov.llt().matrixL();
      Vector acc = Vector::Zero(mean.size());
      Vector u(mean.size());
      for (int s = 0; s < rule.mc_samples; ++s) {
        for (int k = 0; k < u.size(); ++k) u(k) = rng.normal();
        acc += loglik.gradient(mean + root * u);
      }
      return acc / rule.mc_samples;
    }
  }
  throw NumericalError("expected_gradient: unknown rule");
}

inline Matrix expected_hessian(const TwiceDifferentiable& loglik, const GaussianDensity& under,
                               const ExpectationRule& rule) {
  const Vector mean = under.mean();
  const Matrix cov = under.covariance();
  switch (rule.kind) {
    case ExpectationRule::Kind::Analytic:
      return rule.analytic_hessian(mean, cov);
    case ExpectationRule::Kind::Unscented: {
      std::vector<Vector> pts;
      std::vector<double> wts;
      detail::unscented_points(mean, cov, pts, wts);
      Matrix acc = Matrix::Zero(mean.size(), mean.size());
      for (std::size_t k = 0; k < pts.size(); ++k) acc += wts[k] * loglik.hessian(pts[k]);
      return acc;
    }
    case ExpectationRule::Kind::MonteCarlo: {
      Rng rng(Rng::mix(rule.mc_seed, 0x6d68u));
      const Matrix root = cov.llt().matrixL();
      Matrix acc = Matrix::Zero(mean.size(), mean.size());
      Vector u(mean.size());
      for (int s = 0; s < rule.mc_samples; ++s) {
        for (int k = 0; k < u.size(); ++k) u(k) = rng.normal();
        acc += loglik.hessian(mean + root * u);
      }
      return acc / rule.mc_samples;
    }
  }
  throw NumericalError("expected_hessian: unknown rule");
}

// Information update with the expected Hessian and gradient under the prior:
//   Omega' = Omega - E[grad^2 log q],
//   mu'    = mu + Omega'^{-1} E[grad log q].
// The mean step uses the updated information matrix, which makes the update
// reduce exactly to the linear-Gaussian posterior for linear models.
inline GaussianDensity gvi_update(const GaussianDensity& prior, const TwiceDifferentiable& loglik,
                                  const ExpectationRule& rule) {
  const Matrix omega = prior.omega() - expected_hessian(loglik, prior, rule);
  Eigen::LLT<Matrix> llt(omega);
  if (llt.info() != Eigen::Success)
    throw CurvatureError("gvi_update: updated information matrix is not positive definite");
  const Vector mu = prior.mean() + llt.solve(expected_gradient(loglik, prior, rule));
  try {
    return GaussianDensity(prior.vars(), omega, omega * mu);
  } catch (const NumericalError&) {
    throw CurvatureError("gvi_update: updated information matrix is not positive definite");
  }
}

// ---- Scalar Gaussian expectations ----------------------------------------

// Gauss-Hermite rule (probabilists' weight) built by Golub-Welsch; used for
// expectations of scalar nonlinearities under a Gaussian projection.
class GaussHermite {
 public:
  explicit GaussHermite(int n = 21) {
    Matrix jacobi = Matrix::Zero(n, n);
    for (int k = 1; k < n; ++k) {
      const double off = std::sqrt(static_cast<double>(k));
      jacobi(k, k - 1) = off;
      jacobi(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
    nodes_.resize(n);
    weights_.resize(n);
    for (int k = 0; k < n; ++k) {
      nodes_[k] = es.eigenvalues()(k);
      const double v0 = es.eigenvectors()(0, k);
      weights_[k] = v0 * v0;
    }
  }

  // E[f(a)] with a ~ N(mean, sd^2).
  template <typename F>
  double expect(double mean, double sd, F&& f) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k)
      acc += weights_[k] * f(mean + sd * nodes_[k]);
    return acc;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

inline double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

// ---- Diagonalized partial Gaussian estimation ---------------------------

// Gaussian with diagonal information matrix, stored as vectors. Used by the
// mapping experiment where dense matrices would be prohibitive.
struct DiagonalGaussian {
  Vector omega;
  Vector mu;

  int dim() const { return static_cast<int>(omega.size()); }

  void validate() const {
    if (omega.size() != mu.size()) throw LayoutError("DiagonalGaussian: size mismatch");
    for (int k = 0; k < omega.size(); ++k)
      if (!(omega(k) > 0.0))
        throw NumericalError("DiagonalGaussian: information entries must be positive");
  }
};

// Index alignment between two agents' local state vectors: shared_source[s_i]
// is agent j's index of the same variable, or -1 when the coordinate is
// distinct. This is the sparse form of the 0/1 matrices R_ij and S_ij.
struct IndexMaps {
  std::map<std::pair<int, int>, std::vector<int>> shared_source;

  static IndexMaps build(const VariableLayout& layout) {
    IndexMaps maps;
    const int n = layout.num_agents();
    std::vector<std::map<VarId, int>> local_offset(n);
    for (int a = 0; a < n; ++a) {
      int off = 0;
      for (VarId v : layout.agent_subset(a)) {
        local_offset[a][v] = off;
        off += layout.dim_of(v);
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        std::vector<int> src(layout.agent_dim(i), -1);
        for (VarId v : layout.shared_subset(i, j)) {
          const int oi = local_offset[i][v];
          const int oj = local_offset[j][v];
          for (int k = 0; k < layout.dim_of(v); ++k) src[oi + k] = oj + k;
        }
        maps.shared_source[{i, j}] = std::move(src);
      }
    }
    return maps;
  }

  const std::vector<int>& source(int i, int j) const {
    const auto it = shared_source.find({i, j});
    if (it == shared_source.end()) throw LayoutError("IndexMaps: unknown agent pair");
    return it->second;
  }

  // Dense R_ij (d_i x d_j) for tests.
  Matrix r_matrix(int i, int j, int dim_j) const {
    const auto& src = source(i, j);
    Matrix r = Matrix::Zero(src.size(), dim_j);
    for (std::size_t s = 0; s < src.size(); ++s)
      if (src[s] >= 0) r(s, src[s]) = 1.0;
    return r;
  }

  // Dense diagonal S_ij (d_i x d_i) for tests.
  Matrix s_matrix(int i, int j) const {
    const auto& src = source(i, j);
    Matrix s = Matrix::Zero(src.size(), src.size());
    for (std::size_t k = 0; k < src.size(); ++k)
      if (src[k] < 0) s(k, k) = 1.0;
    return s;
  }
};

// Diagonal observation model: supplies the expected gradient and the
// (diagonal of the) expected negative Hessian under a diagonal Gaussian.
struct DiagonalGviModel {
  std::function<Vector(int agent, const DiagonalGaussian& under)> expected_grad;
  std::function<Vector(int agent, const DiagonalGaussian& under)> expected_neg_hess_diag;
};

// One synchronous round of Lemma-style diagonalized mixing plus GVI update:
//   Omega~_{ji} = R_ij Omega_j + S_ij Omega_i  (and the mu~ analog),
//   Omega_v = sum_j A_ij Omega~_{ji},   Omega_v mu_v = sum_j A_ij Omega~ mu~,
//   Omega'  = Omega_v + E[-hess],       mu' = mu_v + Omega_v^{-1} E[grad].
inline std::vector<DiagonalGaussian> diag_gvi_step(const std::vector<DiagonalGaussian>& states,
                                                   const Network& net, const IndexMaps& maps,
                                                   const DiagonalGviModel& model) {
  const int n = net.size();
  if (static_cast<int>(states.size()) != n) throw LayoutError("diag_gvi_step: state count");
  for (const auto& s : states) s.validate();
  std::vector<DiagonalGaussian> next(n);
  for (int i = 0; i < n; ++i) {
    const int d = states[i].dim();
    Vector omega_v = net.weights()(i, i) * states[i].omega;
    Vector eta_v = net.weights()(i, i) * states[i].omega.cwiseProduct(states[i].mu);
    for (int j : net.neighbors(i)) {
      const double w = net.weights()(i, j);
      const auto& src = maps.source(i, j);
      if (static_cast<int>(src.size()) != d)
        throw ContractError("diag_gvi_step: index map does not match state dim");
      Vector om(d), mu(d);
      for (int k = 0; k < d; ++k) {
        if (src[k] >= 0) {
          om(k) = states[j].omega(src[k]);
          mu(k) = states[j].mu(src[k]);
        } else {
          om(k) = states[i].omega(k);
          mu(k) = states[i].mu(k);
        }
      }
      omega_v += w * om;
      eta_v += w * om.cwiseProduct(mu);
    }
    DiagonalGaussian mixed{omega_v, eta_v.cwiseQuotient(omega_v)};
    const Vector g = model.expected_grad(i, mixed);
    const Vector h = model.expected_neg_hess_diag(i, mixed);
    DiagonalGaussian out;
    out.omega = mixed.omega + h;
    for (int k = 0; k < d; ++k)
      if (!(out.omega(k) > 0.0))
        throw CurvatureError("diag_gvi_step: information left the positive cone");
    out.mu = mixed.mu + g.cwiseQuotient(out.omega);
    next[i] = std::move(out);
  }
  return next;
}

// Mixing-only variant used by tests to cross-check against the dense path.
inline DiagonalGaussian diag_mix(const std::vector<DiagonalGaussian>& states, const Network& net,
                                 const IndexMaps& maps, int agent) {
  const int d = states[agent].dim();
  Vector omega_v = net.weights()(agent, agent) * states[agent].omega;
  Vector eta_v =
      net.weights()(agent, agent) * states[agent].omega.cwiseProduct(states[agent].mu);
  for (int j : net.neighbors(agent)) {
    const double w = net.weights()(agent, j);
    const auto& src = maps.source(agent, j);
    Vector om(d), mu(d);
    for (int k = 0; k < d; ++k) {
      if (src[k] >= 0) {
        om(k) = states[j].omega(src[k]);
        mu(k) = states[j].mu(src[k]);
      } else {
        om(k) = states[agent].omega(k);
        mu(k) = states[agent].mu(k);
      }
    }
    omega_v += w * om;
    eta_v += w * om.cwiseProduct(mu);
  }
  return {omega_v, eta_v.cwiseQuotient(omega_v)};
}

}  // namespace smdnet
