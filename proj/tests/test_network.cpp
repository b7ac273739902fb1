#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "smdnet/network.hpp"
#include "test_support.hpp"

using namespace smdnet;

TEST_CASE("sinkhorn normalization") {
  SECTION("already doubly stochastic input is returned unchanged") {
    Eigen::MatrixXd m(2, 2);
    m << 0.7, 0.3, 0.3, 0.7;
    auto out = sinkhorn_normalize(m);
    CHECK((out - m).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("all-ones 2x2 becomes uniform") {
    Eigen::MatrixXd m(2, 2);
    m << 1.0, 1.0, 1.0, 1.0;
    auto out = sinkhorn_normalize(m);
    CHECK_THAT(out(0, 1), Catch::Matchers::WithinAbs(0.5, 1e-12));
    CHECK_THAT(out(0, 0), Catch::Matchers::WithinAbs(0.5, 1e-12));
  }

  SECTION("fixed point of [[2,1],[1,1]]") {
    Eigen::MatrixXd m(2, 2);
    m << 2.0, 1.0, 1.0, 1.0;
    auto out = sinkhorn_normalize(m);
    CHECK(std::abs(out.row(0).sum() - 1.0) < 1e-10);
    CHECK(std::abs(out.col(1).sum() - 1.0) < 1e-10);
    CHECK((out - out.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    // Frozen from running the sweep to its fixed point (residual 0).
    CHECK_THAT(out(0, 1), Catch::Matchers::WithinAbs(0.4143586430, 1e-6));
  }

  SECTION("input validation") {
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.2, 0.4, 1.0;
    CHECK_THROWS_AS(sinkhorn_normalize(asym), LayoutError);
    Eigen::MatrixXd zdiag(2, 2);
    zdiag << 0.0, 1.0, 1.0, 1.0;
    CHECK_THROWS_AS(sinkhorn_normalize(zdiag), LayoutError);
  }
}

TEST_CASE("network invariants from sinkhorn construction") {
  for (auto kind : {std::string("line"), std::string("ring"), std::string("star"),
                    std::string("complete")}) {
    const int n = 6;
    auto net = Network::with_sinkhorn_weights(n, topology_edges(kind, n, 0));
    const auto& a = net.weights();
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(a.row(i).sum() - 1.0) < 1e-10);
      CHECK(std::abs(a.col(i).sum() - 1.0) < 1e-10);
      CHECK(a(i, i) > 0.0);
    }
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(contraction_rate(net) < 1.0 - 1e-6);
  }
  // Every topology in the sweep keeps a strict spectral gap.
  for (int edges : {7, 11, 15, 19, 23, 27}) {
    auto net = Network::with_sinkhorn_weights(8, interpolated_edges(8, edges, 7));
    CHECK(contraction_rate(net) < 1.0 - 1e-6);
  }
}

TEST_CASE("contraction rate") {
  SECTION("uniform complete weights have rate zero") {
    const int n = 4;
    Eigen::MatrixXd a = Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    Network net(n, complete_edges(n), a);
    CHECK(contraction_rate(net) < 1e-12);
  }

  SECTION("two agents with uniform weights") {
    Eigen::MatrixXd a(2, 2);
    a << 0.5, 0.5, 0.5, 0.5;
    Network net(2, {{0, 1}}, a);
    CHECK(contraction_rate(net) < 1e-12);
  }

  SECTION("8-ring cross-checked by deflated power iteration") {
    auto net = Network::with_sinkhorn_weights(8, ring_edges(8));
    const double sigma = contraction_rate(net);
    // Power iteration on B = A - (1/n) 1 1^T; for symmetric doubly
    // stochastic A the spectral norm of B is the second singular value.
    Eigen::MatrixXd b =
        net.weights() - Eigen::MatrixXd::Constant(8, 8, 1.0 / 8.0);
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(8, 0.3, 1.7);
    double lambda = 0.0;
    for (int it = 0; it < 2000; ++it) {
      Eigen::VectorXd w = b * v;
      lambda = w.norm();
      v = w / lambda;
    }
    CHECK_THAT(sigma, Catch::Matchers::WithinAbs(lambda, 1e-8));
    CHECK(sigma < 1.0 - 1e-6);
  }
}

TEST_CASE("restricted weight matrices stay doubly stochastic") {
  auto net = Network::with_sinkhorn_weights(6, ring_edges(6));
  std::vector<int> subset{0, 1, 2};
  auto ax = restricted_weights(net, subset);
  for (int r = 0; r < 3; ++r) {
    CHECK(std::abs(ax.row(r).sum() - 1.0) < 1e-12);
    CHECK(std::abs(ax.col(r).sum() - 1.0) < 1e-12);
  }
  CHECK(contraction_rate(net, &subset) < 1.0);

  std::vector<int> disconnected{0, 3};
  CHECK_THROWS_AS(contraction_rate(net, &disconnected), ConnectivityError);
}

TEST_CASE("validate marginal consensus") {
  SECTION("all agents share all variables") {
    VariableLayout layout;
    layout.add_variable("a", 1);
    layout.add_variable("b", 2);
    for (int i = 0; i < 4; ++i) layout.set_agent_subset(i, {0, 1});
    auto net = Network::with_sinkhorn_weights(4, ring_edges(4));
    auto index = validate_marginal_consensus(layout, net);
    CHECK(index.agents.at(0).size() == 4);
    CHECK(index.agents.at(1).size() == 4);
  }

  SECTION("ring localization neighborhoods are connected") {
    const int n = 8;
    auto net = Network::with_sinkhorn_weights(n, ring_edges(n));
    VariableLayout layout;
    for (int v = 0; v < n; ++v) layout.add_variable("x" + std::to_string(v), 2);
    for (int i = 0; i < n; ++i) {
      std::vector<VarId> subset;
      for (int j : net.closed_neighborhood(i)) subset.push_back(j);
      layout.set_agent_subset(i, subset);
    }
    auto index = validate_marginal_consensus(layout, net);
    for (int v = 0; v < n; ++v) CHECK(index.agents.at(v).size() == 3);
  }

  SECTION("disconnected owner set is an error naming the variable") {
    // Two cliques {0,1} and {2,3} joined only through 1-2; agents 0 and 3
    // share a variable but have no communication path inside the owner set.
    VariableLayout layout;
    layout.add_variable("shared", 1);
    layout.add_variable("filler", 1);
    layout.set_agent_subset(0, {0});
    layout.set_agent_subset(1, {1});
    layout.set_agent_subset(2, {1});
    layout.set_agent_subset(3, {0});
    auto net = Network::with_sinkhorn_weights(4, line_edges(4));
    CHECK_THROWS_WITH(validate_marginal_consensus(layout, net),
                      Catch::Matchers::ContainsSubstring("shared"));
  }
}

TEST_CASE("topology generators") {
  CHECK(line_edges(8).size() == 7);
  CHECK(ring_edges(8).size() == 8);
  CHECK(star_edges(8).size() == 7);
  CHECK(complete_edges(8).size() == 28);

  for (int target : {7, 11, 15, 19, 23, 27}) {
    auto e = interpolated_edges(8, target, 99);
    CHECK(static_cast<int>(e.size()) == target);
    CHECK(is_connected(8, e));
  }
  CHECK_THROWS_AS(interpolated_edges(8, 3, 0), LayoutError);

  auto er = erdos_renyi_edges(10, 0.3, 5);
  CHECK(is_connected(10, er));
}
