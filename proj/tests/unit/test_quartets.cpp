#include <doctest.h>

#include <map>
#include <set>

#include "oracles.hpp"
#include "quartree/error.hpp"
#include "quartree/newick.hpp"
#include "quartree/quartets.hpp"
#include "quartree/simulate.hpp"

using namespace quartree;

namespace {

std::uint64_t binom(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST_SUITE("quartets") {
  TEST_CASE("enumeration and ranking") {
    std::size_t count = 0;
    for (const Quartet& q : enumerate_quartets(4)) {
      CHECK(q == Quartet::of(0, 1, 2, 3));
      ++count;
    }
    CHECK(count == 1);
    CHECK(quartet_count(64) == 635376);

    std::set<Quartet> all;
    std::uint64_t rank = 0;
    for (const Quartet& q : enumerate_quartets(11)) {
      CHECK(q[0] < q[1]);
      CHECK(q[1] < q[2]);
      CHECK(q[2] < q[3]);
      CHECK(quartet_rank(q) == rank);
      CHECK(quartet_unrank(rank) == q);
      all.insert(q);
      ++rank;
    }
    CHECK(all.size() == binom(11, 4));
    CHECK_THROWS(enumerate_quartets(3));

    const auto s = sample_quartets(11, 100, 4);
    CHECK(std::set<Quartet>(s.begin(), s.end()).size() == 100);
    for (const auto& q : s) CHECK(all.count(q) == 1);
    CHECK(sample_quartets(11, 100, 4) == s);
    CHECK(sample_quartets(11, binom(11, 4), 1).size() == binom(11, 4));
    CHECK_THROWS_AS(sample_quartets(11, binom(11, 4) + 1, 1), InvalidArgumentError);
    CHECK(choose(64, 4) == 635376);
    CHECK_THROWS_AS(choose(200000, 100), NumericalError);
  }

  TEST_CASE("distance sums") {
    const Tree t = parse_newick("((A:1,B:1):1,C:1,D:1);");
    const auto s = distance_sums(path_distance_matrix(t), Quartet::of(0, 1, 2, 3));
    CHECK(s.s1 == 4.0);
    CHECK(s.s2 == 6.0);
    CHECK(s.s3 == 6.0);
    CHECK(s.of(QuartetTopology::AcBd) == 6.0);

    DistanceMatrix flat({"a", "b", "c", "d"});
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j) flat.set(i, j, 2.5);
    const auto f = distance_sums(flat, Quartet::of(0, 1, 2, 3));
    CHECK(f.s1 == f.s2);
    CHECK(f.s2 == f.s3);

    Rng rng(3);
    DistanceMatrix m({"a", "b", "c", "d", "e", "f"});
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = i + 1; j < 6; ++j) m.set(i, j, rng.uniform(0, 5));
    for (const Quartet& q : enumerate_quartets(6)) {
      const auto r = distance_sums(m, q);
      CHECK(r.s1 == m(q[0], q[1]) + m(q[2], q[3]));
      CHECK(r.s2 == m(q[0], q[2]) + m(q[1], q[3]));
      CHECK(r.s3 == m(q[0], q[3]) + m(q[1], q[2]));
    }
  }

  TEST_CASE("partition classification") {
    const PartitionPrior same({0, 0, 0, 0, 1});
    const auto four = classify_by_partition(Quartet::of(0, 1, 2, 3), same);
    CHECK(four.composition == Composition::Four);
    CHECK_FALSE(four.known);
    const PartitionPrior mixed({0, 0, 1, 2});
    const auto c = classify_by_partition(Quartet::of(0, 1, 2, 3), mixed);
    CHECK(c.composition == Composition::TwoOneOne);
    CHECK(c.known);

    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::uint32_t> clades(9);
      for (std::uint32_t i = 0; i < 9; ++i) clades[i] = i < 3 ? i : static_cast<std::uint32_t>(rng.below(3));
      const PartitionPrior prior(clades);
      for (const Quartet& q : enumerate_quartets(9)) {
        std::map<std::uint32_t, int> m;
        for (int k = 0; k < 4; ++k) ++m[clades[q[k]]];
        std::vector<int> mult;
        for (const auto& [_, v] : m) mult.push_back(v);
        std::sort(mult.rbegin(), mult.rend());
        const auto got = classify_by_partition(q, prior);
        const bool known = mult == std::vector<int>{2, 2} || mult == std::vector<int>{2, 1, 1};
        CHECK(got.known == known);
        if (mult == std::vector<int>{3, 1}) CHECK(got.composition == Composition::ThreeOne);
        if (mult.size() == 4) CHECK(got.composition == Composition::OneOneOneOne);
      }
    }
    CHECK_THROWS(PartitionPrior({0, 0, 0}));
  }

  TEST_CASE("resolution from the partition") {
    CHECK(resolve_from_partition(Quartet::of(0, 1, 2, 3), PartitionPrior({0, 0, 1, 1})) == QuartetTopology::AbCd);
    CHECK(resolve_from_partition(Quartet::of(0, 1, 2, 3), PartitionPrior({2, 0, 2, 1})) == QuartetTopology::AcBd);
    CHECK_THROWS_AS(resolve_from_partition(Quartet::of(0, 1, 2, 3), PartitionPrior({0, 0, 0, 1})),
                    InvalidArgumentError);

    for (std::size_t depth : {3, 4, 6}) {
      const Tree t = full_binary_topology(depth);
      const QuartetTopologyIndex truth(t);
      for (std::size_t level = 1; level <= 3 && level < depth; ++level) {
        const auto prior = PartitionPrior::from_tree(t, level);
        CHECK(prior.k() == (std::size_t{1} << level));
        for (const Quartet& q : enumerate_quartets(t.leaf_count())) {
          if (!classify_by_partition(q, prior).known) continue;
          CHECK(resolve_from_partition(q, prior) == truth(q));
        }
      }
    }
    CHECK_THROWS(PartitionPrior::from_tree(parse_newick("((A,B,C),D);"), 2));
  }

  TEST_CASE("label classification") {
    const LabelPrior all(std::vector<bool>(6, true));
    CHECK(classify_by_labels(Quartet::of(0, 1, 2, 3), all) == LabelClass::Known);
    const LabelPrior half({true, true, false, false, true});
    CHECK(classify_by_labels(Quartet::of(0, 1, 2, 3), half) == LabelClass::Partial);
    CHECK(classify_by_labels(Quartet::of(0, 2, 3, 4), half) == LabelClass::Partial);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto prior = LabelPrior::random(14, 0.1 * static_cast<double>(seed), seed);
      std::map<LabelClass, std::uint64_t> counts;
      for (const Quartet& q : enumerate_quartets(14)) ++counts[classify_by_labels(q, prior)];
      const std::uint64_t l = prior.labeled_count();
      CHECK(l == labeled_leaf_count(0.1 * static_cast<double>(seed), 14));
      CHECK(counts[LabelClass::Known] == binom(l, 4));
      CHECK(counts[LabelClass::Unknown] == binom(14 - l, 4));
      CHECK(counts[LabelClass::Known] + counts[LabelClass::Partial] + counts[LabelClass::Unknown] == binom(14, 4));
    }
    CHECK(labeled_leaf_count(0.3, 110) == 33);
    CHECK(labeled_leaf_count(0.8, 102) == 81);
  }

  TEST_CASE("theoretical proportions") {
    const auto two = theoretical_partition_proportions(2);
    CHECK(two[0] == Fraction::make(1, 8));
    CHECK(two[1] == Fraction::make(1, 2));
    CHECK(two[2] == Fraction::make(3, 8));
    CHECK(two[3] == Fraction::make(0, 1));
    CHECK(two[4] == Fraction::make(0, 1));
    CHECK(resolvable_fraction(4) == Fraction::make(45, 64));
    for (std::uint64_t k = 2; k <= 16; ++k) {
      const auto p = theoretical_partition_proportions(k);
      Fraction total = p[0];
      for (int i = 1; i < 5; ++i) total = total + p[i];
      CHECK(total == Fraction::make(1, 1));
      const auto brute = oracle::brute_partition_proportions(k);
      for (int i = 0; i < 5; ++i) {
        CHECK(p[i].num == brute[i].num);
        CHECK(p[i].den == brute[i].den);
      }
      if (k != 4) CHECK(resolvable_fraction(k).value() < resolvable_fraction(4).value());
    }
  }

  TEST_CASE("exact known counts") {
    const Tree b64 = full_binary_topology(6);
    CHECK(exact_known_counts(b64, 1).known() == 246016);
    CHECK(exact_known_counts(b64, 2).known() == 455040);
    CHECK(exact_known_counts(b64, 3).known() == 323008);
    CHECK(exact_known_counts(b64, 1).total == 635376);
    CHECK(exact_known_counts(b64, 2).known_fraction() == doctest::Approx(0.716).epsilon(1e-3));

    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 8 + rng.below(8);
      const std::size_t k = 2 + rng.below(4);
      std::vector<std::uint32_t> clades(n);
      for (std::size_t i = 0; i < n; ++i) clades[i] = i < k ? static_cast<std::uint32_t>(i) : static_cast<std::uint32_t>(rng.below(k));
      const auto sizes = PartitionPrior(clades).clade_sizes();
      const auto got = exact_known_counts(sizes);
      const auto [tt, to] = oracle::brute_known_counts(clades);
      CHECK(got.two_two == tt);
      CHECK(got.two_one_one == to);
      CHECK(got.total == binom(n, 4));
    }
  }

  TEST_CASE("balanced unknown fraction") {
    CHECK(balanced_unknown_fraction(1) == doctest::Approx(0.625));
    CHECK(balanced_unknown_fraction(2) == doctest::Approx(1.0 / 64 + 1.0 / 4));
    CHECK(balanced_unknown_fraction(3) == doctest::Approx(1.0 / 512 + 1.0 / 16));
    CHECK(std::abs(balanced_unknown_fraction(3) - 0.064) < 5e-4);
    CHECK(balanced_unknown_fraction(2, 64) ==
          doctest::Approx(1.0 - 455040.0 / 635376.0));
  }

  TEST_CASE("label fraction curve") {
    CHECK(labeled_fraction_curve(0.5).known == doctest::Approx(0.0625));
    CHECK(labeled_fraction_curve(0.8).known == doctest::Approx(0.4096));
    const auto c = labeled_fraction_curve(0.8);
    CHECK(c.known + c.partial + c.unknown == doctest::Approx(1.0));
    const auto e = labeled_fraction_curve(0.8, 102);
    CHECK(e.labeled == 81u);
    CHECK(e.known_count == 1663740u);
    CHECK(e.unknown_count == 5985u);
    CHECK(e.known == doctest::Approx(0.392).epsilon(2e-3));
  }
}
