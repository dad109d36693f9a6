#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "oracles.hpp"
#include "quartree/error.hpp"
#include "quartree/feature_table.hpp"
#include "quartree/newick.hpp"
#include "quartree/simulate.hpp"

using namespace quartree;

namespace {

FeatureTable random_table(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd v(n, d);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal() * 3.0;
  std::vector<std::string> rows, cols;
  for (std::size_t i = 0; i < n; ++i) rows.push_back("r" + std::to_string(i));
  for (std::size_t j = 0; j < d; ++j) cols.push_back("c" + std::to_string(j));
  std::vector<FeatureRole> roles(d, FeatureRole::Signal);
  if (d > 1) roles[1] = FeatureRole::Noise;
  return FeatureTable(rows, cols, v, roles);
}

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "quartree_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::vector<double> sorted_column(const Eigen::MatrixXd& m, Eigen::Index j) {
  std::vector<double> v(m.col(j).data(), m.col(j).data() + m.rows());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_SUITE("treeio") {
  TEST_CASE("parse simple trees") {
    const Tree two = parse_newick("(A:1,B:1);");
    CHECK(two.leaf_count() == 2);
    CHECK(path_distance_matrix(two)(0, 1) == 2.0);

    const Tree q = parse_newick("((A:1,B:1):1,(C:1,D:1):1);");
    CHECK(q.rooted());
    const Tree u = q.unrooted();
    const auto b = bipartitions(u);
    REQUIRE(b.size() == 1);
    const auto d = path_distance_matrix(u);
    CHECK(d(*u.find_leaf("A"), *u.find_leaf("C")) == 4.0);
    double internal = 0;
    for (NodeId v = 0; v < u.node_count(); ++v)
      if (v != u.root() && !u.is_leaf(v)) internal += u.length(v);
    CHECK(internal == 2.0);
  }

  TEST_CASE("dialect: optional lengths, comments, quotes, internal labels") {
    const Tree t = parse_newick(" ( 'a b':2 [note], ('it''s',C)inner:0.5 )root ; ");
    CHECK(t.find_leaf("a b").has_value());
    CHECK(t.find_leaf("it's").has_value());
    const auto d = path_distance_matrix(t);
    CHECK(d(*t.find_leaf("it's"), *t.find_leaf("C")) == 2.0);
    CHECK(d(*t.find_leaf("a b"), *t.find_leaf("C")) == 3.5);
  }

  TEST_CASE("parse errors carry offsets") {
    for (const char* bad : {"((A,B);", "(A,B)", "(A,,B);", "(A,A);", "(A:x,B);", "(A,B); junk", "", "(A:-1,B);"}) {
      CAPTURE(bad);
      CHECK_THROWS_AS(parse_newick(bad), ParseError);
    }
    try {
      parse_newick("(A,B)");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 5);
    }
  }

  TEST_CASE("write format and determinism") {
    const Tree t = parse_newick("(B:1,A:1);");
    CHECK(write_newick(t) == "(A:1.000000,B:1.000000);");
    const Tree r = oracle::random_tree(20, 4, true);
    CHECK(write_newick(r) == write_newick(r));
    const std::string once = write_newick(parse_newick(write_newick(r)));
    CHECK(once == write_newick(parse_newick(once)));
  }

  TEST_CASE("round trip on 200 random trees") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const std::size_t n = 2 + seed * 126 / 199;
      const Tree t = oracle::random_tree(n, seed, seed % 2 == 0);
      const Tree back = parse_newick(write_newick(t, 17));
      CHECK(back.structurally_equal(t, 1e-12));
      CHECK(oracle::splits(back) == oracle::splits(t));
    }
  }

  TEST_CASE("newick files") {
    const auto path = temp_file("t.nwk");
    const Tree t = oracle::random_tree(12, 8, false);
    write_newick_file(t, path, 17);
    CHECK(read_newick_file(path).structurally_equal(t, 1e-12));
    CHECK_THROWS_AS(read_newick_file(temp_file("missing.nwk")), IngestionError);
  }

  TEST_CASE("feature CSV") {
    const FeatureTable zeros = parse_feature_csv("leaf,x,y\na,0,0\nb,0,0\nc,0,0\n");
    CHECK(zeros.rows() == 3);
    CHECK(zeros.cols() == 2);
    CHECK(zeros.values().isZero());
    CHECK_FALSE(zeros.has_roles());

    const FeatureTable roles = parse_feature_csv("leaf,x,y\n#role,signal,noise\na,1,2\n");
    CHECK(roles.roles()[0] == FeatureRole::Signal);
    CHECK(roles.roles()[1] == FeatureRole::Noise);

    try {
      parse_feature_csv("leaf,x\na,1\nb,nan\nc,2,3\nc,4\n");
      FAIL("expected IngestionError");
    } catch (const IngestionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("b") != std::string::npos);
      CHECK(msg.find("c") != std::string::npos);
    }

    const FeatureTable t = random_table(7, 5, 3);
    const auto path = temp_file("t.csv");
    save_feature_csv(t, path);
    const FeatureTable back = load_feature_csv(path);
    CHECK(back.row_labels() == t.row_labels());
    CHECK(back.column_labels() == t.column_labels());
    CHECK(back.roles() == t.roles());
    CHECK((back.values() - t.values()).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("ingestion rejects every injected non-finite cell") {
    const FeatureTable t = random_table(6, 4, 1);
    const std::string good = format_feature_csv(t);
    Rng rng(2);
    for (int trial = 0; trial < 30; ++trial) {
      FeatureTable bad = t;
      const auto i = static_cast<Eigen::Index>(rng.below(6));
      const auto j = static_cast<Eigen::Index>(rng.below(4));
      const double poison[] = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity(),
                               -std::numeric_limits<double>::infinity()};
      bad.values()(i, j) = poison[trial % 3];
      const std::string text = format_feature_csv(bad);
      CHECK_THROWS_AS(parse_feature_csv(text), IngestionError);
    }
    CHECK_NOTHROW(parse_feature_csv(good));
  }

  TEST_CASE("distance CSV round trip") {
    const auto d = path_distance_matrix(oracle::random_tree(6, 2, false));
    const auto path = temp_file("d.csv");
    save_distance_csv(d, path);
    const auto back = load_distance_csv(path);
    CHECK(back.labels() == d.labels());
    CHECK(back.max_abs_difference(d) == 0.0);
  }

  TEST_CASE("aggregate by group") {
    Eigen::MatrixXd v(2, 2);
    v << 0, 2, 2, 0;
    const FeatureTable two({"a", "b"}, {"x", "y"}, v);
    const auto mean = aggregate_by_group(two, {{"a", "T"}, {"b", "T"}});
    REQUIRE(mean.rows() == 1);
    CHECK(mean.values()(0, 0) == 1.0);
    CHECK(mean.values()(0, 1) == 1.0);

    const FeatureTable t = random_table(9, 3, 5);
    std::map<std::string, std::string> singles;
    for (const auto& r : t.row_labels()) singles[r] = "T" + r;
    CHECK(aggregate_by_group(t, singles).values() == t.values());

    std::map<std::string, std::string> groups;
    for (std::size_t i = 0; i < 9; ++i) groups[t.row_labels()[i]] = "G" + std::to_string(i % 3);
    const auto agg = aggregate_by_group(t, groups);
    REQUIRE(agg.rows() == 3);
    for (std::size_t g = 0; g < 3; ++g) {
      CHECK(agg.row_labels()[g] == "G" + std::to_string(g));
      for (Eigen::Index j = 0; j < 3; ++j) {
        double s = 0;
        for (std::size_t i = g; i < 9; i += 3) s += t.values()(static_cast<Eigen::Index>(i), j);
        CHECK(agg.values()(static_cast<Eigen::Index>(g), j) == doctest::Approx(s / 3));
      }
    }
    groups.erase("r0");
    CHECK_THROWS_AS(aggregate_by_group(t, groups), InvalidArgumentError);
  }

  TEST_CASE("permutation nulls") {
    const FeatureTable t = random_table(12, 6, 9);
    const auto leaf = permute_dataset(t, PermutationMode::Leaf, 1);
    CHECK(leaf.values() == t.values());
    CHECK(leaf.row_labels() != t.row_labels());
    auto a = leaf.row_labels(), b = t.row_labels();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    // Column means and variances do not depend on which label a row carries.
    CHECK(leaf.values().colwise().mean().isApprox(t.values().colwise().mean()));

    const auto cell = permute_dataset(t, PermutationMode::Cell, 1);
    CHECK(cell.values() != t.values());
    for (Eigen::Index j = 0; j < 6; ++j) CHECK(sorted_column(cell.values(), j) == sorted_column(t.values(), j));

    const auto gene = permute_dataset(t, PermutationMode::Gene, 1);
    const Eigen::MatrixXd gt = gene.values().transpose(), tt = t.values().transpose();
    for (Eigen::Index i = 0; i < 12; ++i) CHECK(sorted_column(gt, i) == sorted_column(tt, i));

    CHECK(permute_dataset(t, PermutationMode::Cell, 4).values() == permute_dataset(t, PermutationMode::Cell, 4).values());
    CHECK(parse_permutation_mode("gene") == PermutationMode::Gene);
    CHECK_FALSE(parse_permutation_mode("rows").has_value());
  }

  TEST_CASE("feature distances") {
    const FeatureTable t = random_table(5, 4, 2);
    const auto e = feature_distances(t, DistanceKind::Euclidean);
    const auto s = feature_distances(t, DistanceKind::SquaredEuclidean);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        const double ref = (t.values().row(static_cast<Eigen::Index>(i)) - t.values().row(static_cast<Eigen::Index>(j))).squaredNorm();
        CHECK(s(i, j) == doctest::Approx(ref));
        CHECK(e(i, j) == doctest::Approx(std::sqrt(ref)));
      }
  }
}
