#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "quartree/metrics.hpp"
#include "quartree/quartets.hpp"
#include "quartree/reconstruct.hpp"
#include "quartree/simulate.hpp"

using namespace quartree;

TEST_SUITE("simulate") {
  TEST_CASE("topologies") {
    const Tree t = full_binary_topology(2);
    CHECK(t.leaf_count() == 4);
    CHECK(t.node_count() - t.leaf_count() == 3);  // root plus two clade nodes
    CHECK(bipartitions(t).size() == 1);
    CHECK(quartet_count(full_binary_topology(6).leaf_count()) == 635376);

    const Tree a = random_binary_topology(40, 12);
    const Tree b = random_binary_topology(40, 12);
    CHECK(a.structurally_equal(b));
    CHECK(a.is_binary());
    CHECK(a.leaf_count() == 40);
    CHECK(oracle::rf(a, random_binary_topology(40, 13)) > 0.0);
  }

  TEST_CASE("edge lengths") {
    const Tree base = random_binary_topology(64, 1);
    const Tree unit = sample_edge_lengths(base, 1.0 + 1e-12, 3);
    for (NodeId v = 0; v < unit.node_count(); ++v)
      if (v != unit.root()) CHECK(unit.length(v) == doctest::Approx(1.0));

    double sum = 0;
    std::size_t count = 0;
    for (std::uint64_t seed = 0; count < 100000; ++seed) {
      const Tree t = sample_edge_lengths(base, 3.0, seed);
      for (NodeId v = 0; v < t.node_count(); ++v) {
        if (v == t.root()) continue;
        CHECK(t.length(v) >= 1.0);
        CHECK(t.length(v) <= 3.0);
        sum += t.length(v);
        ++count;
      }
    }
    CHECK(std::abs(sum / static_cast<double>(count) - 2.0) < 0.02);
  }

  TEST_CASE("brownian increments have variance equal to path length") {
    const Tree t = sample_edge_lengths(random_binary_topology(6, 2), 2.0, 2);
    const auto d = path_distance_matrix(t);
    const FeatureTable x = brownian_signals(t, 10000, 5);
    CHECK(x.row_labels() == t.leaf_labels());
    for (Eigen::Index i = 0; i < 6; ++i)
      for (Eigen::Index j = i + 1; j < 6; ++j) {
        const double var = (x.values().row(i) - x.values().row(j)).squaredNorm() / 10000.0;
        CHECK(std::abs(var / d(i, j) - 1.0) < 0.05);
      }

  }

  TEST_CASE("zero-length pendant edges copy the parent state") {
    TreeBuilder b;
    const NodeId r = b.add_root();
    const NodeId m = b.add_child(r, 1.0);
    b.add_child(m, 0.0, "A");
    b.add_child(m, 0.0, "B");
    b.add_child(r, 1.0, "C");
    const FeatureTable x = brownian_signals(std::move(b).build(true), 50, 1);
    CHECK(x.values().row(0) == x.values().row(1));
  }

  TEST_CASE("gaussian noise") {
    const auto zero = gaussian_noise_features(10, 5, 0.0, 1.0, 1);
    CHECK(zero.values().isZero());
    const auto noise = gaussian_noise_features(1000, 1000, 0.5, 2.0, 3);
    const double sd = std::sqrt(noise.values().squaredNorm() / 1e6);
    CHECK(std::abs(sd - 1.0) < 0.02);
    for (FeatureRole r : noise.roles()) CHECK(r == FeatureRole::Noise);
  }

  TEST_CASE("mean column sd is the population sd averaged over columns") {
    Eigen::MatrixXd v(4, 2);
    v << 1, 0, 2, 0, 3, 10, 4, 10;
    const FeatureTable t({"a", "b", "c", "d"}, {"x", "y"}, v);
    CHECK(mean_column_sd(t) == doctest::Approx((std::sqrt(1.25) + 5.0) / 2.0));
  }

  TEST_CASE("alternative trees") {
    SimulationConfig c;
    c.n_leaves = 64;
    c.n_altsig = 10;
    c.alt_partitions = {0.5, 0.5};
    Rng rng(4);
    const auto layout = alternative_tree_noise(default_leaf_labels(64), c, 1.0, rng);
    REQUIRE(layout.trees.size() == 2);
    CHECK(layout.trees[0].leaf_count() == 32);
    CHECK(layout.trees[1].leaf_count() == 32);
    CHECK(layout.features.cols() == 20);
    for (FeatureRole r : layout.features.roles()) CHECK(r == FeatureRole::AltSignal);

    SimulationConfig one;
    one.n_leaves = 32;
    one.n_altsig = 400;
    one.beta = 1.0;
    Rng rng2(8);
    const Tree truth = sample_edge_lengths(random_binary_topology(32, 77), 2.0, 5);
    const auto conf = alternative_tree_noise(truth.leaf_labels(), one, 1.0, rng2);
    REQUIRE(conf.trees.size() == 1);
    const Tree nj = neighbor_joining(feature_distances(conf.features, DistanceKind::SquaredEuclidean));
    CHECK(rf_distance(conf.trees[0], nj) < rf_distance(truth, nj));

    SimulationConfig flat = one;
    flat.beta = 1e-9;
    Rng rng3(1);
    const auto tiny = alternative_tree_noise(truth.leaf_labels(), flat, 1.0, rng3);
    CHECK(mean_column_sd(tiny.features) < 1e-3);
  }

  TEST_CASE("supervised replicates") {
    const FeatureTable zero({"a", "b"}, {"x"}, Eigen::MatrixXd::Zero(2, 1));
    CHECK(make_supervised_replicate(zero, 1).values().isZero());

    const Tree t = sample_edge_lengths(random_binary_topology(64, 3), 2.0, 3);
    const FeatureTable s = brownian_signals(t, 20, 3);
    const auto r1 = make_supervised_replicate(s, 1);
    const auto r2 = make_supervised_replicate(s, 2);
    CHECK(r1.values() != r2.values());
    const Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(s.values().data(), s.values().size());
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(r1.values().data(), r1.values().size());
    const double corr = ((a.array() - a.mean()) * (b.array() - b.mean())).sum() /
                        std::sqrt((a.array() - a.mean()).square().sum() * (b.array() - b.mean()).square().sum());
    CHECK(corr > 0.99);
  }

  TEST_CASE("full pipeline") {
    SimulationConfig c;
    c.n_leaves = 64;
    c.n_signal = 20;
    c.n_noise = 20;
    c.alpha = 0.5;
    c.n_altsig = 20;
    c.beta = 0.5;
    c.seed = 9;
    const Dataset d = simulate_dataset(c);
    CHECK(d.train.cols() == 60);
    CHECK(d.test.cols() == 60);
    CHECK(d.train.rows() == 64);
    CHECK(d.alt_trees.size() == 1);
    CHECK(d.train.columns_with_role(FeatureRole::Signal).size() == 20);
    CHECK(d.train.columns_with_role(FeatureRole::Noise).size() == 20);
    CHECK(d.train.columns_with_role(FeatureRole::AltSignal).size() == 20);
    CHECK(d.train.columns_with_role(FeatureRole::Unknown).empty());
    const Dataset again = simulate_dataset(c);
    CHECK(again.train.values() == d.train.values());
    CHECK(again.test.values() == d.test.values());
    CHECK(again.tree.structurally_equal(d.tree, 0.0));
    CHECK_THROWS_AS([&] {
      SimulationConfig bad = c;
      bad.n_leaves = 2;
      bad.validate();
    }(), ConfigError);

    SimulationConfig clean;
    clean.n_leaves = 32;
    clean.n_signal = 200;
    clean.n_noise = 0;
    clean.seed = 1;
    const Dataset s = simulate_dataset(clean);
    const Tree nj = neighbor_joining(feature_distances(s.test, DistanceKind::SquaredEuclidean));
    CHECK(rf_distance(s.tree, nj) < 0.25);
  }

  TEST_CASE("empirical distances") {
    const FeatureTable same({"a", "b"}, {"x", "y"}, Eigen::MatrixXd::Ones(2, 2));
    CHECK(empirical_distance_matrix({same})(0, 1) == 0.0);
  }
}
