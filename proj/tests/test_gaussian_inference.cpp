#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "smdnet/estimators.hpp"
#include "smdnet/gaussian_inference.hpp"
#include "smdnet/grid.hpp"
#include "test_support.hpp"

using namespace smdnet;
using namespace smdnet::testing;

TEST_CASE("linear gaussian posterior") {
  auto prior = gauss1d(0.0, 1.0);
  LinearGaussianModel model(Matrix::Identity(1, 1), Matrix::Identity(1, 1));
  Vector z(1);
  z << 1.0;

  SECTION("alpha zero returns the prior") {
    auto post = linear_gaussian_posterior(prior, model, z, 0.0);
    CHECK(post.omega()(0, 0) == prior.omega()(0, 0));
    CHECK(post.eta()(0) == prior.eta()(0));
  }

  SECTION("unit scalar case") {
    auto post = linear_gaussian_posterior(prior, model, z, 1.0);
    CHECK_THAT(post.mean()(0), Catch::Matchers::WithinAbs(0.5, 1e-14));
    CHECK_THAT(post.covariance()(0, 0), Catch::Matchers::WithinAbs(0.5, 1e-14));
  }

  SECTION("relative measurement adds a rank-one information block") {
    auto vars = scalar_vars(2);
    GaussianDensity p(vars, 0.5 * Matrix::Identity(2, 2), Vector::Zero(2));
    Matrix h(1, 2);
    h << 1.0, -1.0;
    Matrix v(1, 1);
    v << 2.0;
    Vector zr(1);
    zr << 0.3;
    auto post = linear_gaussian_posterior(p, LinearGaussianModel(h, v), zr, 1.0);
    Matrix gain = post.omega() - p.omega();
    CHECK_THAT(gain(0, 0), Catch::Matchers::WithinAbs(2.0, 1e-14));
    CHECK_THAT(gain(0, 1), Catch::Matchers::WithinAbs(-2.0, 1e-14));
    CHECK_THAT(gain(1, 1), Catch::Matchers::WithinAbs(2.0, 1e-14));
  }

  SECTION("randomized agreement with the grid oracle") {
    Rng rng(51);
    auto vars = scalar_vars(1);
    for (int c = 0; c < 8; ++c) {
      auto p = random_gaussian(rng, vars);
      Matrix h(1, 1), v(1, 1);
      h << rng.uniform(0.5, 2.0);
      v << rng.uniform(0.5, 2.0);
      Vector zz(1);
      zz << rng.uniform(-2.0, 2.0);
      const double alpha = rng.uniform(0.3, 1.0);
      LinearGaussianModel m(h, v);
      auto post = linear_gaussian_posterior(p, m, zz, alpha);

      auto axes = oracle_axes({p, post});
      GridDensity shell = GridDensity::uniform(axes);
      std::vector<double> field(shell.cells());
      Vector x(1);
      for (long i = 0; i < shell.cells(); ++i) {
        shell.node(i, x);
        field[i] = m.log_likelihood(x, zz);
      }
      auto grid_post = grid_bayes_update(GridDensity::from_gaussian(p, axes), field, alpha);
      CHECK(grid_kl(GridDensity::from_gaussian(post, axes), grid_post) < 1e-6);
    }
  }
}

TEST_CASE("gaussian marginal mix") {
  Rng rng(53);
  auto vars = scalar_vars(2);

  SECTION("coherent neighbor marginals are a fixed point") {
    auto self = random_gaussian(rng, vars);
    std::map<int, GaussianDensity> margs;
    margs.emplace(1, marginalize(self, {1}));
    std::map<int, double> w{{0, 0.6}, {1, 0.4}};
    auto mixed = gaussian_marginal_mix(self, margs, w, 0);
    CHECK((mixed.omega() - self.omega()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((mixed.eta() - self.eta()).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("single neighbor with weight one and full overlap") {
    auto self = random_gaussian(rng, vars);
    auto other = random_gaussian(rng, vars);
    std::map<int, GaussianDensity> margs;
    margs.emplace(1, other);
    std::map<int, double> w{{0, 0.0}, {1, 1.0}};
    auto mixed = gaussian_marginal_mix(self, margs, w, 0);
    CHECK((mixed.omega() - other.omega()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((mixed.eta() - other.eta()).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("two-agent 2d case agrees with the grid oracle pipeline") {
    for (int c = 0; c < 5; ++c) {
      auto self = random_gaussian(rng, vars);
      auto nb = random_gaussian(rng, {vars[1]});
      std::map<int, GaussianDensity> margs;
      margs.emplace(1, nb);
      std::map<int, double> w{{0, 0.5}, {1, 0.5}};
      auto mixed = gaussian_marginal_mix(self, margs, w, 0);

      auto axes = oracle_axes({self, mixed});
      auto g_self = GridDensity::from_gaussian(self, axes);
      auto g_nb = GridDensity::from_gaussian(nb, {axes[1]});
      auto merged = grid_conditional_marginal_product(g_self, g_nb);
      auto g_mixed = grid_geometric_mix({g_self, merged}, {0.5, 0.5});
      CHECK(grid_kl(GridDensity::from_gaussian(mixed, axes), g_mixed.density) < 1e-5);
    }
  }
}

namespace {

// Logistic log-likelihood log sigma(x) for a positive observation.
TwiceDifferentiable logistic_loglik() {
  TwiceDifferentiable f;
  f.value = [](const Vector& x) { return std::log(sigmoid(x(0))); };
  f.gradient = [](const Vector& x) {
    Vector g(1);
    g << 1.0 - sigmoid(x(0));
    return g;
  };
  f.hessian = [](const Vector& x) {
    Matrix h(1, 1);
    const double s = sigmoid(x(0));
    h << -s * (1.0 - s);
    return h;
  };
  return f;
}

}  // namespace

TEST_CASE("gvi update") {
  SECTION("linear loglik reduces to the exact posterior") {
    Rng rng(57);
    auto vars = scalar_vars(2);
    auto prior = random_gaussian(rng, vars);
    Matrix h(1, 2);
    h << 1.2, -0.4;
    Matrix v(1, 1);
    v << 1.7;
    Vector z(1);
    z << 0.8;
    LinearGaussianModel model(h, v);
    TwiceDifferentiable f;
    f.value = [&](const Vector& x) { return model.log_likelihood(x, z); };
    f.gradient = [&](const Vector& x) { return Vector(h.transpose() * v * (z - h * x)); };
    f.hessian = [&](const Vector&) { return Matrix(-h.transpose() * v * h); };

    auto exact = linear_gaussian_posterior(prior, model, z, 1.0);
    auto approx = gvi_update(prior, f, ExpectationRule::unscented());
    CHECK((approx.omega() - exact.omega()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((approx.mean() - exact.mean()).cwiseAbs().maxCoeff() < 1e-8);
  }

  SECTION("zero gradient and Hessian keep the prior") {
    auto prior = gauss1d(0.7, 2.0);
    TwiceDifferentiable f;
    f.value = [](const Vector&) { return 0.0; };
    f.gradient = [](const Vector&) { return Vector::Zero(1); };
    f.hessian = [](const Vector&) { return Matrix::Zero(1, 1); };
    auto out = gvi_update(prior, f, ExpectationRule::unscented());
    CHECK_THAT(out.mean()(0), Catch::Matchers::WithinAbs(0.7, 1e-12));
    CHECK_THAT(out.covariance()(0, 0), Catch::Matchers::WithinAbs(2.0, 1e-12));
  }

  SECTION("logistic expectations match central finite differences") {
    auto f = logistic_loglik();
    const double mu = 0.4, var = 0.04;
    auto prior = gauss1d(mu, var);
    const Vector eg = expected_gradient(f, prior, ExpectationRule::unscented());
    const Matrix eh = expected_hessian(f, prior, ExpectationRule::unscented());

    // d/dmu E[log q] = E[grad log q] for a location family; the oracle is a
    // dense Gauss-Hermite evaluation of E[log q] at shifted means.
    GaussHermite gh(64);
    auto value_at = [&](double m) {
      return gh.expect(m, std::sqrt(var),
                       [&](double a) { return std::log(sigmoid(a)); });
    };
    const double h = 1e-3;
    const double fd_grad = (value_at(mu + h) - value_at(mu - h)) / (2.0 * h);
    const double fd_hess = (value_at(mu + h) - 2.0 * value_at(mu) + value_at(mu - h)) / (h * h);
    CHECK_THAT(eg(0), Catch::Matchers::WithinAbs(fd_grad, 1e-4));
    CHECK_THAT(eh(0, 0), Catch::Matchers::WithinAbs(fd_hess, 1e-4));
  }

  SECTION("unscented and monte carlo agree within three standard errors") {
    auto f = logistic_loglik();
    auto prior = gauss1d(-0.3, 0.49);
    const Vector eg = expected_gradient(f, prior, ExpectationRule::unscented());

    Rng rng(61);
    const int k = 10000;
    double acc = 0.0, acc2 = 0.0;
    for (int s = 0; s < k; ++s) {
      Vector x(1);
      x << -0.3 + 0.7 * rng.normal();
      const double g = f.gradient(x)(0);
      acc += g;
      acc2 += g * g;
    }
    const double mc_mean = acc / k;
    const double mc_se = std::sqrt((acc2 / k - mc_mean * mc_mean) / k);
    CHECK(std::abs(eg(0) - mc_mean) < 3.0 * mc_se);
  }

  SECTION("negative curvature beyond the prior is a curvature error") {
    auto prior = gauss1d(0.0, 1.0);  // info 1
    TwiceDifferentiable f;
    f.value = [](const Vector&) { return 0.0; };
    f.gradient = [](const Vector&) { return Vector::Zero(1); };
    f.hessian = [](const Vector&) { return Matrix(2.0 * Matrix::Identity(1, 1)); };
    CHECK_THROWS_AS(gvi_update(prior, f, ExpectationRule::unscented()), CurvatureError);
  }
}

TEST_CASE("index maps") {
  VariableLayout layout;
  layout.add_variable("a", 1);
  layout.add_variable("b", 1);
  layout.add_variable("c", 1);
  layout.set_agent_subset(0, {0, 1});
  layout.set_agent_subset(1, {1, 2});
  auto maps = IndexMaps::build(layout);

  const Matrix r01 = maps.r_matrix(0, 1, layout.agent_dim(1));
  const Matrix s01 = maps.s_matrix(0, 1);
  // Every row of R has at most one 1 and R*1 + S*1 = 1.
  for (int r = 0; r < r01.rows(); ++r) {
    CHECK(r01.row(r).sum() <= 1.0);
    CHECK_THAT(r01.row(r).sum() + s01.row(r).sum(), Catch::Matchers::WithinAbs(1.0, 1e-15));
  }
  CHECK(r01(1, 0) == 1.0);  // agent 0's "b" maps to agent 1's first slot
  CHECK(s01(0, 0) == 1.0);  // agent 0's "a" is distinct
}

TEST_CASE("diag gvi step") {
  auto quiet_model = [] {
    DiagonalGviModel m;
    m.expected_grad = [](int, const DiagonalGaussian& g) { return Vector::Zero(g.dim()); };
    m.expected_neg_hess_diag = [](int, const DiagonalGaussian& g) {
      return Vector::Zero(g.dim());
    };
    return m;
  }();

  SECTION("disjoint variable sets leave parameters untouched") {
    VariableLayout layout;
    layout.add_variable("a", 1);
    layout.add_variable("b", 1);
    layout.set_agent_subset(0, {0});
    layout.set_agent_subset(1, {1});
    auto net = Network::with_sinkhorn_weights(2, {{0, 1}});
    auto maps = IndexMaps::build(layout);
    std::vector<DiagonalGaussian> states{{Vector::Constant(1, 2.0), Vector::Constant(1, 0.5)},
                                         {Vector::Constant(1, 3.0), Vector::Constant(1, -1.0)}};
    auto next = diag_gvi_step(states, net, maps, quiet_model);
    CHECK_THAT(next[0].omega(0), Catch::Matchers::WithinAbs(2.0, 1e-12));
    CHECK_THAT(next[0].mu(0), Catch::Matchers::WithinAbs(0.5, 1e-12));
  }

  SECTION("identical states with shared indices are a fixed point") {
    VariableLayout layout;
    layout.add_variable("a", 1);
    layout.add_variable("b", 1);
    layout.set_agent_subset(0, {0, 1});
    layout.set_agent_subset(1, {0, 1});
    auto net = Network::with_sinkhorn_weights(2, {{0, 1}});
    auto maps = IndexMaps::build(layout);
    Vector om(2), mu(2);
    om << 1.5, 2.5;
    mu << 0.3, -0.7;
    std::vector<DiagonalGaussian> states{{om, mu}, {om, mu}};
    auto next = diag_gvi_step(states, net, maps, quiet_model);
    CHECK((next[0].omega - om).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((next[1].mu - mu).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("matches the dense marginal mix restricted to diagonal matrices") {
    // Two agents, three variables, overlap on the middle one.
    VariableLayout layout;
    layout.add_variable("a", 1);
    layout.add_variable("b", 1);
    layout.add_variable("c", 1);
    layout.set_agent_subset(0, {0, 1});
    layout.set_agent_subset(1, {1, 2});
    auto net = Network::with_sinkhorn_weights(2, {{0, 1}});
    auto maps = IndexMaps::build(layout);

    Rng rng(63);
    Vector om0(2), mu0(2), om1(2), mu1(2);
    for (int k = 0; k < 2; ++k) {
      om0(k) = rng.uniform(0.5, 3.0);
      om1(k) = rng.uniform(0.5, 3.0);
      mu0(k) = rng.uniform(-1.0, 1.0);
      mu1(k) = rng.uniform(-1.0, 1.0);
    }
    std::vector<DiagonalGaussian> states{{om0, mu0}, {om1, mu1}};
    auto mixed = diag_mix(states, net, maps, 0);

    // Dense path: agent 0's density over {a, b}, neighbor marginal over {b}.
    std::vector<Variable> v0{{0, 1, "a"}, {1, 1, "b"}};
    GaussianDensity self(v0, om0.asDiagonal(), om0.cwiseProduct(mu0));
    GaussianDensity nb_marg({{1, 1, "b"}}, Matrix(om1.head(1).asDiagonal()),
                            Vector(om1.head(1).cwiseProduct(mu1.head(1))));
    std::map<int, GaussianDensity> margs;
    margs.emplace(1, nb_marg);
    std::map<int, double> w{{0, net.weights()(0, 0)}, {1, net.weights()(0, 1)}};
    auto dense = gaussian_marginal_mix(self, margs, w, 0);

    CHECK((Vector(dense.omega().diagonal()) - mixed.omega).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((dense.mean() - mixed.mu).cwiseAbs().maxCoeff() < 1e-8);
  }

  SECTION("non-positive information is a contract violation") {
    VariableLayout layout;
    layout.add_variable("a", 1);
    layout.set_agent_subset(0, {0});
    layout.set_agent_subset(1, {0});
    auto net = Network::with_sinkhorn_weights(2, {{0, 1}});
    auto maps = IndexMaps::build(layout);
    std::vector<DiagonalGaussian> states{{Vector::Constant(1, -1.0), Vector::Zero(1)},
                                         {Vector::Constant(1, 1.0), Vector::Zero(1)}};
    CHECK_THROWS_AS(diag_gvi_step(states, net, maps, quiet_model), NumericalError);
  }
}
