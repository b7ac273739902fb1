#pragma once

#include <vector>

#include "smdnet/gaussian.hpp"
#include "smdnet/grid.hpp"
#include "smdnet/rng.hpp"
#include "smdnet/variables.hpp"

namespace smdnet::testing {

inline std::vector<Variable> scalar_vars(int count, int first_id = 0) {
  std::vector<Variable> v;
  for (int k = 0; k < count; ++k) v.push_back({first_id + k, 1, "x" + std::to_string(first_id + k)});
  return v;
}

inline Matrix random_spd(Rng& rng, int d, double eig_lo = 0.4, double eig_hi = 3.0) {
  Matrix m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ();
  Vector eig(d);
  for (int k = 0; k < d; ++k) eig(k) = rng.uniform(eig_lo, eig_hi);
  return q * eig.asDiagonal() * q.transpose();
}

inline GaussianDensity random_gaussian(Rng& rng, const std::vector<Variable>& vars,
                                       double mean_range = 2.0, double eig_lo = 0.4,
                                       double eig_hi = 3.0) {
  int d = 0;
  for (const auto& v : vars) d += v.dim;
  const Matrix omega = random_spd(rng, d, eig_lo, eig_hi);
  Vector mu(d);
  for (int k = 0; k < d; ++k) mu(k) = rng.uniform(-mean_range, mean_range);
  return GaussianDensity(vars, omega, omega * mu);
}

inline GaussianDensity gauss1d(double mean, double var, VarId id = 0) {
  const double omega = 1.0 / var;
  Matrix om(1, 1);
  om << omega;
  Vector eta(1);
  eta << omega * mean;
  return GaussianDensity({{id, 1, "x" + std::to_string(id)}}, om, eta);
}

// Random strictly positive grid density: a mixture of lattice-smooth bumps.
inline GridDensity random_grid(Rng& rng, const std::vector<GridAxis>& axes, int bumps = 3,
                               double sharpness = 6.0) {
  GridDensity shell = GridDensity::uniform(axes);
  std::vector<double> lg(shell.cells(), 0.0);
  const int nd = shell.ndim();
  std::vector<Vector> centers;
  std::vector<double> scales;
  for (int b = 0; b < bumps; ++b) {
    Vector c(nd);
    for (int k = 0; k < nd; ++k) c(k) = rng.uniform(axes[k].lo, axes[k].hi);
    centers.push_back(c);
    scales.push_back(rng.uniform(1.0, sharpness));
  }
  Vector x(nd);
  for (long i = 0; i < shell.cells(); ++i) {
    shell.node(i, x);
    double acc = 1e-4;
    for (int b = 0; b < bumps; ++b) {
      double q = 0.0;
      for (int k = 0; k < nd; ++k) {
        const double w = (x(k) - centers[b](k)) / (axes[k].hi - axes[k].lo);
        q += w * w;
      }
      acc += std::exp(-scales[b] * q * 10.0);
    }
    lg[i] = std::log(acc);
  }
  return GridDensity(axes, std::move(lg));
}

}  // namespace smdnet::testing
