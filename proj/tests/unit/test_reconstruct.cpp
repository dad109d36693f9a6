#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "oracles.hpp"
#include "quartree/error.hpp"
#include "quartree/newick.hpp"
#include "quartree/reconstruct.hpp"
#include "quartree/simulate.hpp"

using namespace quartree;

namespace {

Tree random_weighted(std::size_t n, std::uint64_t seed) {
  return sample_edge_lengths(random_binary_topology(n, seed), 2.0, seed + 1000);
}

DistanceMatrix perturbed(const DistanceMatrix& d, double amplitude, Rng& rng) {
  DistanceMatrix out = d;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j) out.set(i, j, d(i, j) + rng.uniform(-amplitude, amplitude));
  return out;
}

}  // namespace

TEST_SUITE("reconstruct") {
  TEST_CASE("additive inputs are reconstructed exactly") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const std::size_t n = 4 + seed * 60 / 99;
      const Tree t = random_weighted(n, seed);
      const auto d = path_distance_matrix(t);
      const Tree nj = neighbor_joining(d);
      CHECK(nj.leaf_labels() == d.labels());
      CHECK_FALSE(nj.rooted());
      CHECK(nj.is_binary());
      CHECK(oracle::rf(t, nj) == 0.0);
      CHECK(path_distance_matrix(nj).max_abs_difference(d) < 1e-9);
    }
  }

  TEST_CASE("single quartet") {
    DistanceMatrix d({"A", "B", "C", "D"});
    d.set(0, 1, 2);
    d.set(2, 3, 2);
    for (auto [i, j] : {std::pair{0, 2}, {0, 3}, {1, 2}, {1, 3}}) d.set(i, j, 3);
    const auto b = bipartitions(neighbor_joining(d));
    REQUIRE(b.size() == 1);
    CHECK(b[0].side_a.contains(1));
    CHECK_FALSE(b[0].side_a.contains(2));
  }

  TEST_CASE("degenerate and invalid inputs") {
    DistanceMatrix two({"A", "B"});
    two.set(0, 1, 1);
    CHECK_THROWS_AS(neighbor_joining(two), DegenerateInputError);
    DistanceMatrix bad({"A", "B", "C"});
    bad.set(0, 1, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS(neighbor_joining(bad));
  }

  TEST_CASE("negative lengths are clamped and recorded") {
    DistanceMatrix d({"A", "B", "C", "D"});
    d.set(0, 1, 1);
    d.set(0, 2, 10);
    d.set(0, 3, 1);
    d.set(1, 2, 1);
    d.set(1, 3, 10);
    d.set(2, 3, 1);
    const auto r = neighbor_joining_detailed(d);
    for (NodeId v = 0; v < r.tree.node_count(); ++v) CHECK(r.tree.length(v) >= 0.0);
    const auto negatives = std::count_if(r.raw_lengths.begin(), r.raw_lengths.end(), [](double x) { return x < 0; });
    CHECK(static_cast<std::size_t>(negatives) == r.clamped);
  }

  TEST_CASE("order invariance") {
    Rng rng(4);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto d = perturbed(path_distance_matrix(random_weighted(15, seed)), 0.8, rng);
      std::vector<std::size_t> order(15);
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(std::span<std::size_t>(order));
      const Tree a = neighbor_joining(d);
      const Tree b = neighbor_joining(d.subset(order));
      CHECK(oracle::splits(a) == oracle::splits(b));
    }
  }

  TEST_CASE("Atteson certification") {
    const Tree t = parse_newick("((A:1,B:1):1,(C:1,D:1):1,E:1);");
    const auto d = path_distance_matrix(t);
    const auto exact = atteson_certified(d, t);
    CHECK(exact.certified);
    CHECK(exact.max_deviation == 0.0);
    CHECK(exact.radius == 0.5);
    auto edge = d;
    edge.set(0, 3, d(0, 3) + 0.5);
    CHECK_FALSE(atteson_certified(edge, t).certified);
    CHECK_THROWS_AS(atteson_certified(path_distance_matrix(parse_newick("(X,Y,Z);")), t), InvalidArgumentError);

    Rng rng(1);
    int certified = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const Tree w = random_weighted(8 + trial % 25, 300 + trial);
      const auto m = perturbed(path_distance_matrix(w), rng.uniform(0.05, 0.9), rng);
      if (!atteson_certified(m, w).certified) continue;
      ++certified;
      CHECK(oracle::rf(w, neighbor_joining(m)) == 0.0);
    }
    CHECK(certified > 10);
  }

  TEST_CASE("path matrix") {
    const auto star = path_matrix(parse_newick("(A:1,B:1,C:1);"));
    CHECK(star.incidence.rows() == 3);
    CHECK(star.incidence.cols() == 3);
    for (Eigen::Index r = 0; r < 3; ++r) CHECK(star.incidence.row(r).sum() == 2.0);

    const Tree q = parse_newick("((A:1,B:1):1,C:1,D:1);");
    const auto p = path_matrix(q);
    CHECK(p.incidence.rows() == 6);
    CHECK(p.incidence.cols() == 5);
    Eigen::Index internal = -1;
    for (std::size_t k = 0; k < p.edges.size(); ++k)
      if (!q.is_leaf(p.edges[k])) internal = static_cast<Eigen::Index>(k);
    REQUIRE(internal >= 0);
    Eigen::VectorXd expect(6);
    expect << 0, 1, 1, 1, 1, 0;
    CHECK(p.incidence.col(internal) == expect);

    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const Tree t = oracle::random_tree(3 + seed % 30, seed, seed % 2 == 0);
      const auto pm = path_matrix(t);
      Eigen::VectorXd e(static_cast<Eigen::Index>(pm.edges.size()));
      for (std::size_t k = 0; k < pm.edges.size(); ++k) e[static_cast<Eigen::Index>(k)] = t.length(pm.edges[k]);
      const Eigen::VectorXd m = vectorize_pairs(path_distance_matrix(t));
      CHECK((pm.incidence * e - m).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("NNLS fitting") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const Tree t = random_weighted(4 + seed % 20, seed + 77).unrooted();
      const auto fit = fit_edge_lengths_nnls(t.with_unit_lengths(), path_distance_matrix(t));
      CHECK(fit.residual < 1e-6);
      CHECK(fit.tree.structurally_equal(t, 1e-6));
    }

    const Tree five = parse_newick("((A:1,B:2):1.5,C:1,(D:0.5,E:1):2);");
    const auto d = path_distance_matrix(five);
    const auto other = fit_edge_lengths_nnls(parse_newick("((A,C),B,(D,E));"), d);
    CHECK(other.residual > 1e-3);

    DistanceMatrix zero(five.leaf_labels());
    const auto z = fit_edge_lengths_nnls(five, zero);
    CHECK(z.residual == 0.0);
    for (double l : z.tree.lengths()) CHECK(l == 0.0);
  }

  TEST_CASE("NNLS solutions satisfy KKT") {
    Rng rng(5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Tree t = random_weighted(10, seed);
      const auto m = perturbed(path_distance_matrix(t), 1.5, rng);
      const auto fit = fit_edge_lengths_nnls(random_binary_topology(10, seed + 1), m);
      const auto p = path_matrix(fit.tree);
      for (std::size_t k = 0; k < p.edges.size(); ++k) {
        const double len = fit.tree.length(p.edges[k]);
        const double g = fit.gradient[static_cast<Eigen::Index>(k)];
        if (len > 0) CHECK(std::abs(g) < 1e-6);
        else CHECK(g >= -1e-6);
      }
    }
  }
}
