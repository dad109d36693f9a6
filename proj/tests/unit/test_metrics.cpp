#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "quartree/error.hpp"
#include "quartree/metrics.hpp"
#include "quartree/newick.hpp"
#include "quartree/simulate.hpp"

using namespace quartree;

TEST_SUITE("metrics") {
  TEST_CASE("RF examples") {
    const Tree t = random_binary_topology(20, 1);
    CHECK(rf_distance(t, t) == 0.0);
    const Tree a = parse_newick("((((A,B),C),D),E);");
    const Tree b = parse_newick("((((A,C),E),B),D);");
    CHECK(rf_distance(a, b) == 1.0);
    const Tree c = parse_newick("((((A,C),B),D),E);");
    CHECK(rf_distance(a, c) == doctest::Approx(oracle::rf(a, c)));
    CHECK(rf_distance(a, c) == 0.5);
    CHECK_THROWS_AS(rf_distance(a, parse_newick("((((A,B),C),D),F);")), InvalidArgumentError);
    CHECK(rf_distance(parse_newick("(A,B,C);"), parse_newick("(A,C,B);")) == 0.0);
  }

  TEST_CASE("RF axioms on random pairs") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const std::size_t n = 4 + seed % 40;
      const Tree x = oracle::random_tree(n, seed, seed % 3 == 0);
      const Tree y = oracle::random_tree(n, seed + 10000, seed % 4 == 0);
      const double d = rf_distance(x, y);
      CHECK(d == rf_distance(y, x));
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
      CHECK(d == doctest::Approx(oracle::rf(x, y)).epsilon(1e-12));
      CHECK(rf_distance(x, x) == 0.0);
    }
  }

  TEST_CASE("quartet distance matches exhaustive enumeration") {
    const Tree a = parse_newick("((((A,B),C),D),E);");
    const Tree c = parse_newick("((((A,C),B),D),E);");
    CHECK(quartet_distance(a, a) == 0.0);
    CHECK(quartet_distance(a, c) == doctest::Approx(oracle::qd(a, c)));
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const std::size_t n = 4 + seed % 7;
      const Tree x = oracle::random_tree(n, seed, seed % 2 == 0);
      const Tree y = oracle::random_tree(n, seed + 555, seed % 3 == 0);
      const auto r = quartet_distance_detailed(x, y);
      CHECK(r.exact);
      CHECK(r.qd == doctest::Approx(oracle::qd(x, y)).epsilon(1e-12));
      CHECK(r.qd == quartet_distance(y, x));
    }
  }

  TEST_CASE("unresolved differs from resolved") {
    const Tree star = parse_newick("(A,B,C,D);");
    const Tree bin = parse_newick("((A,B),(C,D));");
    CHECK(quartet_distance(star, bin) == 1.0);
    CHECK(quartet_distance(star, star) == 0.0);
  }

  TEST_CASE("sampled quartet distance is within three standard errors") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Tree x = random_binary_topology(20, seed);
      const Tree y = random_binary_topology(20, seed + 99);
      const double exact = quartet_distance(x, y);
      QdMode mode;
      mode.exact_limit = 0;
      mode.samples = 2000;
      mode.seed = seed;
      const auto r = quartet_distance_detailed(x, y, mode);
      CHECK_FALSE(r.exact);
      CHECK(r.evaluated == 2000);
      const double se = std::sqrt(std::max(exact * (1 - exact), 1e-6) / 2000.0);
      CHECK(std::abs(r.qd - exact) <= 3 * se);
    }
  }

  TEST_CASE("threaded exact enumeration agrees") {
    const Tree x = random_binary_topology(40, 1);
    const Tree y = random_binary_topology(40, 2);
    QdMode one, many;
    many.threads = 4;
    CHECK(quartet_distance_detailed(x, y, one).differing == quartet_distance_detailed(x, y, many).differing);
  }

  TEST_CASE("stratified quartet distance") {
    const Tree x = random_binary_topology(14, 3);
    const Tree y = random_binary_topology(14, 4).with_leaf_order(x.leaf_labels());
    const auto single = stratified_qd(x, y, [](const Quartet&) { return LabelClass::Known; });
    CHECK(single.size() == 1);
    CHECK(single.at(LabelClass::Known) == doctest::Approx(quartet_distance(x, y)));

    const auto prior = LabelPrior::random(14, 0.5, 2);
    const auto stratum = [&](const Quartet& q) { return classify_by_labels(q, prior); };
    const auto by = stratified_qd(x, y, stratum);
    std::map<LabelClass, double> count;
    for (const Quartet& q : enumerate_quartets(14)) count[stratum(q)] += 1;
    double mix = 0;
    for (const auto& [cls, v] : by) mix += v * count[cls];
    CHECK(mix / static_cast<double>(quartet_count(14)) == doctest::Approx(quartet_distance(x, y)));

    const auto none = stratified_qd(x, y, [](const Quartet&) { return LabelClass::Partial; });
    CHECK_FALSE(none.contains(LabelClass::Known));
    CHECK_FALSE(none.contains(LabelClass::Unknown));
  }

  TEST_CASE("delta percent") {
    CHECK(delta_percent(0.923, 0.286) == doctest::Approx(0.690).epsilon(1e-3));
    CHECK(delta_percent(0.4, 0.4) == 0.0);
    CHECK(delta_percent(0.5, 0.6) == doctest::Approx(-0.2));
    CHECK_THROWS_AS(delta_percent(0.0, 0.1), InvalidArgumentError);
  }

  TEST_CASE("evaluate trees") {
    const Tree x = random_binary_topology(12, 1);
    const Tree y = random_binary_topology(12, 2);
    const auto r = evaluate_trees(x, y);
    CHECK(r.rf == rf_distance(x, y));
    CHECK(r.qd == quartet_distance(x, y));
    CHECK(r.qd_exact);
    CHECK(r.stratified.empty());
  }
}
