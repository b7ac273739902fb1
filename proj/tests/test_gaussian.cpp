#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "smdnet/gaussian.hpp"
#include "smdnet/grid.hpp"
#include "test_support.hpp"

using namespace smdnet;
using namespace smdnet::testing;

TEST_CASE("kl divergence closed form") {
  auto p = gauss1d(0.0, 1.0);
  auto q = gauss1d(1.0, 1.0);
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK_THAT(kl_divergence(p, q), Catch::Matchers::WithinAbs(0.5, 1e-12));

  // Cross-check against grid quadrature.
  auto axes = oracle_axes({p, q});
  const double grid_kl_val =
      grid_kl(GridDensity::from_gaussian(p, axes), GridDensity::from_gaussian(q, axes));
  CHECK_THAT(kl_divergence(p, q), Catch::Matchers::WithinAbs(grid_kl_val, 1e-6));
}

TEST_CASE("kl divergence layout errors") {
  auto p = gauss1d(0.0, 1.0, 0);
  auto q = gauss1d(0.0, 1.0, 1);
  CHECK_THROWS_AS(kl_divergence(p, q), LayoutError);
}

TEST_CASE("construction rejects invalid information matrices") {
  auto vars = scalar_vars(2);
  Matrix bad(2, 2);
  bad << 1.0, 0.5, -0.5, 1.0;  // not symmetric
  CHECK_THROWS_AS(GaussianDensity(vars, bad, Vector::Zero(2)), NumericalError);
  Matrix sing(2, 2);
  sing << 1.0, 1.0, 1.0, 1.0;  // rank one
  CHECK_THROWS_AS(GaussianDensity(vars, sing, Vector::Zero(2)), NumericalError);
  CHECK_THROWS_AS(GaussianDensity(vars, Matrix::Identity(3, 3), Vector::Zero(3)), LayoutError);
}

TEST_CASE("tv distance") {
  auto p = gauss1d(0.0, 1.0);
  CHECK(tv_distance(p, p) < 1e-12);
  auto q = gauss1d(3.0, 1.0);
  // 2*Phi(1.5) - 1, frozen from the grid quadrature oracle.
  CHECK_THAT(tv_distance(p, q), Catch::Matchers::WithinAbs(0.8664, 1e-4));

  Rng rng(2024);
  for (int c = 0; c < 10; ++c) {
    auto vars = scalar_vars(1);
    auto a = random_gaussian(rng, vars);
    auto b = random_gaussian(rng, vars);
    const double tv = tv_distance(a, b);
    CHECK(tv >= 0.0);
    CHECK(tv <= 1.0);
  }
}

TEST_CASE("pinsker inequality on random gaussian pairs") {
  Rng rng(7);
  for (int c = 0; c < 40; ++c) {
    const int d = 1 + (c % 2);
    auto vars = scalar_vars(d);
    auto p = random_gaussian(rng, vars);
    auto q = random_gaussian(rng, vars);
    const double tv = tv_distance(p, q);
    CHECK(kl_divergence(p, q) >= 2.0 * tv * tv - 1e-6);
  }
}

TEST_CASE("geometric mean basics") {
  auto p = gauss1d(0.0, 1.0);
  auto q = gauss1d(2.0, 1.0);

  auto same = geometric_mean({p}, {1.0});
  CHECK(same.omega()(0, 0) == p.omega()(0, 0));
  CHECK(same.eta()(0) == p.eta()(0));

  auto mid = geometric_mean({p, q}, {0.5, 0.5});
  CHECK_THAT(mid.mean()(0), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(mid.covariance()(0, 0), Catch::Matchers::WithinAbs(1.0, 1e-12));

  // Consensus fixed point: equal inputs, stochastic weights.
  auto fixed = geometric_mean({p, p, p}, {0.2, 0.5, 0.3});
  CHECK_THAT(fixed.mean()(0), Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK_THAT(fixed.omega()(0, 0), Catch::Matchers::WithinAbs(1.0, 1e-12));

  CHECK_THROWS_AS(geometric_mean({p, q}, {0.5, -0.5}), LayoutError);
}

TEST_CASE("geometric mean agrees with grid pooling oracle") {
  Rng rng(11);
  auto vars = scalar_vars(2);
  for (int c = 0; c < 8; ++c) {
    auto a = random_gaussian(rng, vars);
    auto b = random_gaussian(rng, vars);
    const double w = rng.uniform(0.2, 0.8);
    auto pooled = geometric_mean({a, b}, {w, 1.0 - w});

    auto axes = oracle_axes({a, b, pooled});
    auto mix = grid_geometric_mix(
        {GridDensity::from_gaussian(a, axes), GridDensity::from_gaussian(b, axes)}, {w, 1.0 - w});
    CHECK(grid_kl(GridDensity::from_gaussian(pooled, axes), mix.density) < 1e-6);
    // Normalization deficit of geometric pooling is never positive.
    CHECK(mix.log_z <= 1e-9);
  }
}

TEST_CASE("marginalize") {
  auto vars = scalar_vars(2);
  Matrix omega(2, 2);
  omega << 2.0, -1.0, -1.0, 2.0;
  GaussianDensity p(vars, omega, Vector::Zero(2));

  auto same = marginalize(p, {0, 1});
  CHECK(same.dim() == 2);

  auto m = marginalize(p, {0});
  CHECK_THAT(m.omega()(0, 0), Catch::Matchers::WithinAbs(1.5, 1e-12));

  // Block-diagonal: marginal is the block itself.
  Matrix block(2, 2);
  block << 2.0, 0.0, 0.0, 5.0;
  GaussianDensity ind(vars, block, Vector::Zero(2));
  CHECK_THAT(marginalize(ind, {1}).omega()(0, 0), Catch::Matchers::WithinAbs(5.0, 1e-12));

  CHECK_THROWS_AS(marginalize(p, {}), LayoutError);
  CHECK_THROWS_AS(marginalize(p, {7}), LayoutError);
}

TEST_CASE("marginalize agrees with grid oracle") {
  Rng rng(13);
  auto vars = scalar_vars(2);
  for (int c = 0; c < 8; ++c) {
    auto p = random_gaussian(rng, vars);
    auto m = marginalize(p, {0});
    auto axes = oracle_axes({p});
    auto grid_m = grid_marginalize(GridDensity::from_gaussian(p, axes), {0});
    CHECK(grid_kl(GridDensity::from_gaussian(m, {axes[0]}), grid_m) < 1e-6);
  }
}

TEST_CASE("condition") {
  auto vars = scalar_vars(2);
  Matrix omega(2, 2);
  omega << 2.0, -1.0, -1.0, 2.0;
  GaussianDensity p(vars, omega, Vector::Zero(2));

  auto cond = condition(p, {1});
  Vector given(1);
  given << 1.0;
  auto at1 = cond.at(given);
  CHECK_THAT(at1.omega()(0, 0), Catch::Matchers::WithinAbs(2.0, 1e-12));
  CHECK_THAT(at1.mean()(0), Catch::Matchers::WithinAbs(0.5, 1e-12));

  // Block-diagonal: conditional ignores the given values.
  Matrix block(2, 2);
  block << 2.0, 0.0, 0.0, 5.0;
  GaussianDensity ind(vars, block, Vector::Zero(2));
  auto cind = condition(ind, {1});
  Vector g1(1), g2(1);
  g1 << -3.0;
  g2 << 4.0;
  CHECK_THAT(cind.at(g1).mean()(0), Catch::Matchers::WithinAbs(cind.at(g2).mean()(0), 1e-12));

  CHECK_THROWS_AS(condition(p, {0, 1}), LayoutError);
}

TEST_CASE("condition and marginalize reconstruct the joint") {
  Rng rng(17);
  for (int c = 0; c < 12; ++c) {
    const int d = 2 + (c % 2);
    auto vars = scalar_vars(d);
    auto p = random_gaussian(rng, vars);
    std::vector<VarId> given{d - 1};
    if (c % 2 == 1 && d == 3) given = {0, 2};
    auto joint = reconstruct_joint(condition(p, given), marginalize(p, given));
    CHECK((joint.omega() - p.omega()).cwiseAbs().maxCoeff() <
          1e-10 * std::max(1.0, p.omega().cwiseAbs().maxCoeff()));
    CHECK((joint.eta() - p.eta()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("conditional marginal product") {
  Rng rng(19);
  auto vars = scalar_vars(2);

  // Self-consistency: using the density's own marginal returns the density.
  for (int c = 0; c < 6; ++c) {
    auto p = random_gaussian(rng, vars);
    auto rebuilt = conditional_marginal_product(p, marginalize(p, {1}));
    CHECK((rebuilt.omega() - p.omega()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((rebuilt.eta() - p.eta()).cwiseAbs().maxCoeff() < 1e-10);
  }

  // Independent self: only the shared block is replaced.
  Matrix block(2, 2);
  block << 2.0, 0.0, 0.0, 5.0;
  GaussianDensity ind(vars, block, Vector::Zero(2));
  auto repl = conditional_marginal_product(ind, gauss1d(1.0, 0.25, 1));
  CHECK_THAT(repl.omega()(1, 1), Catch::Matchers::WithinAbs(4.0, 1e-12));
  CHECK_THAT(repl.omega()(0, 0), Catch::Matchers::WithinAbs(2.0, 1e-12));
  CHECK_THAT(repl.omega()(0, 1), Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK_THAT(marginalize(repl, {1}).mean()(0), Catch::Matchers::WithinAbs(1.0, 1e-12));

  // Marginal over the shared variables must equal the neighbor marginal
  // exactly; the conditional over the private ones must be the self one.
  for (int c = 0; c < 6; ++c) {
    auto p = random_gaussian(rng, vars);
    auto q = random_gaussian(rng, {vars[1]});
    auto merged = conditional_marginal_product(p, q);
    auto back = marginalize(merged, {1});
    CHECK((back.omega() - q.omega()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((back.eta() - q.eta()).cwiseAbs().maxCoeff() < 1e-10);
    auto cond_in = condition(p, {1});
    auto cond_out = condition(merged, {1});
    CHECK((cond_in.omega_kk - cond_out.omega_kk).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((cond_in.omega_kg - cond_out.omega_kg).cwiseAbs().maxCoeff() < 1e-10);
  }

  auto wrong = random_gaussian(rng, scalar_vars(1, 7));
  auto p = random_gaussian(rng, vars);
  CHECK_THROWS_AS(conditional_marginal_product(p, wrong), LayoutError);
}

TEST_CASE("conditional marginal product agrees with grid oracle") {
  Rng rng(23);
  auto vars = scalar_vars(2);
  for (int c = 0; c < 6; ++c) {
    auto p = random_gaussian(rng, vars);
    auto q = random_gaussian(rng, {vars[1]});
    auto merged = conditional_marginal_product(p, q);
    auto axes = oracle_axes({p, merged});
    auto grid_merged = grid_conditional_marginal_product(
        GridDensity::from_gaussian(p, axes), GridDensity::from_gaussian(q, {axes[1]}));
    CHECK(grid_kl(GridDensity::from_gaussian(merged, axes), grid_merged) < 1e-6);
  }
}

TEST_CASE("from_ordered permutes into layout order") {
  // Blocks supplied as (x2, x0) must land in ascending-id order.
  std::vector<Variable> unsorted{{2, 1, "x2"}, {0, 2, "x0"}};
  Matrix omega(3, 3);
  omega << 4.0, 0.5, 0.25, 0.5, 2.0, 0.0, 0.25, 0.0, 3.0;
  Vector eta(3);
  eta << 1.0, 2.0, 3.0;
  auto g = GaussianDensity::from_ordered(unsorted, omega, eta);
  REQUIRE(g.vars().size() == 2);
  CHECK(g.vars()[0].id == 0);
  CHECK(g.vars()[1].id == 2);
  CHECK_THAT(g.omega()(0, 0), Catch::Matchers::WithinAbs(2.0, 1e-15));
  CHECK_THAT(g.omega()(2, 2), Catch::Matchers::WithinAbs(4.0, 1e-15));
  CHECK_THAT(g.omega()(0, 2), Catch::Matchers::WithinAbs(0.5, 1e-15));
  CHECK_THAT(g.eta()(0), Catch::Matchers::WithinAbs(2.0, 1e-15));
  CHECK_THAT(g.eta()(2), Catch::Matchers::WithinAbs(1.0, 1e-15));
}
