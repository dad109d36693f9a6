#pragma once

#include <array>
#include <cstdint>
#include <iterator>
#include <optional>
#include <string_view>
#include <vector>

#include "quartree/distance_matrix.hpp"
#include "quartree/quartet.hpp"
#include "quartree/tree.hpp"

namespace quartree {

/// Binomial coefficient; throws NumericalError on 64-bit overflow.
std::uint64_t choose(std::uint64_t n, std::uint64_t k);

/// C(n, 4).
inline std::uint64_t quartet_count(std::uint64_t n) { return choose(n, 4); }

/// Colexicographic rank of a quartet: C(a,1) + C(b,2) + C(c,3) + C(d,4).
std::uint64_t quartet_rank(const Quartet& q);
Quartet quartet_unrank(std::uint64_t rank);

/// Input iterator over all sorted 4-subsets of {0..n-1} in colex order.
class QuartetIterator {
 public:
  using iterator_category = std::input_iterator_tag;
  using value_type = Quartet;
  using difference_type = std::ptrdiff_t;
  using pointer = const Quartet*;
  using reference = const Quartet&;

  QuartetIterator() = default;
  QuartetIterator(std::uint32_t n, bool end);
  /// Positioned at `start`, which must be a quartet of n leaves.
  static QuartetIterator at(std::uint32_t n, const Quartet& start) noexcept {
    QuartetIterator it(n, false);
    it.current_ = start;
    return it;
  }

  reference operator*() const noexcept { return current_; }
  pointer operator->() const noexcept { return &current_; }
  QuartetIterator& operator++() noexcept;
  QuartetIterator operator++(int) noexcept {
    QuartetIterator copy = *this;
    ++*this;
    return copy;
  }
  bool operator==(const QuartetIterator& other) const noexcept {
    return done_ == other.done_ && (done_ || current_ == other.current_);
  }

 private:
  std::uint32_t n_ = 0;
  Quartet current_{};
  bool done_ = true;
};

struct QuartetRange {
  std::uint32_t n = 0;
  QuartetIterator begin() const { return {n, false}; }
  QuartetIterator end() const { return {n, true}; }
};

/// Every sorted quartet of n leaves exactly once. Throws for n < 4.
QuartetRange enumerate_quartets(std::size_t n);

/// `count` distinct quartets drawn uniformly without replacement, returned in
/// colex order. Throws InvalidArgumentError when count > C(n, 4).
std::vector<Quartet> sample_quartets(std::size_t n, std::size_t count, std::uint64_t seed);

struct QuartetSums {
  double s1 = 0.0;  // D(A,B) + D(C,D)
  double s2 = 0.0;  // D(A,C) + D(B,D)
  double s3 = 0.0;  // D(A,D) + D(B,C)

  double of(QuartetTopology t) const;
};

QuartetSums distance_sums(const DistanceMatrix& matrix, const Quartet& q);

// ---------------------------------------------------------------------------
// Clade partition prior

/// Clade multiplicities of a quartet, largest first.
enum class Composition : std::uint8_t { Four, ThreeOne, TwoTwo, TwoOneOne, OneOneOneOne };

std::string_view to_string(Composition c) noexcept;

struct PartitionClass {
  Composition composition;
  bool known;
};

class PartitionPrior {
 public:
  /// `clade_of[i]` is the clade of leaf i; ids must be dense 0..k-1, k >= 2.
  explicit PartitionPrior(std::vector<std::uint32_t> clade_of, std::optional<std::size_t> level = std::nullopt);

  /// Clades are the leaf sets below the nodes `level` edges under the root of
  /// a rooted tree. Every node above that depth must have exactly two
  /// children, and no leaf may be shallower than `level`. Clade ids follow
  /// the smallest leaf index they contain.
  static PartitionPrior from_tree(const Tree& tree, std::size_t level);

  std::size_t leaf_count() const noexcept { return clade_of_.size(); }
  std::size_t k() const noexcept { return k_; }
  std::optional<std::size_t> level() const noexcept { return level_; }
  std::uint32_t clade_of(std::size_t leaf) const noexcept { return clade_of_[leaf]; }
  const std::vector<std::uint32_t>& clades() const noexcept { return clade_of_; }
  std::vector<std::uint64_t> clade_sizes() const;

 private:
  std::vector<std::uint32_t> clade_of_;
  std::size_t k_ = 0;
  std::optional<std::size_t> level_;
};

/// Known iff the composition is (2,2) or (2,1,1).
PartitionClass classify_by_partition(const Quartet& q, const PartitionPrior& prior);

/// Topology implied by clade membership: co-clade leaves are siblings.
/// Throws InvalidArgumentError for compositions that are not known.
QuartetTopology resolve_from_partition(const Quartet& q, const PartitionPrior& prior);

// ---------------------------------------------------------------------------
// Partial leaf labels

enum class LabelClass : std::uint8_t { Known, Partial, Unknown };

std::string_view to_string(LabelClass c) noexcept;

class LabelPrior {
 public:
  explicit LabelPrior(std::vector<bool> labeled);
  /// floor(kappa * n) leaves chosen uniformly at random.
  static LabelPrior random(std::size_t n, double kappa, std::uint64_t seed);

  std::size_t leaf_count() const noexcept { return labeled_.size(); }
  bool is_labeled(std::size_t leaf) const noexcept { return labeled_[leaf]; }
  std::size_t labeled_count() const noexcept { return count_; }
  double kappa() const noexcept;
  std::vector<std::size_t> labeled_leaves() const;

 private:
  std::vector<bool> labeled_;
  std::size_t count_ = 0;
};

LabelClass classify_by_labels(const Quartet& q, const LabelPrior& prior);

/// Number of labeled leaves used for a fraction kappa of n: floor(kappa n),
/// with a 1e-9 allowance so that e.g. 0.3 * 110 gives 33.
std::size_t labeled_leaf_count(double kappa, std::size_t n);

// ---------------------------------------------------------------------------
// Closed-form and exact combinatorics

/// Non-negative rational number in lowest terms.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Fraction make(std::uint64_t num, std::uint64_t den);
  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  Fraction operator+(const Fraction& other) const;
  bool operator==(const Fraction&) const = default;
};

/// Probabilities of compositions (4), (3,1), (2,2), (2,1,1), (1,1,1,1) when
/// each of four leaves falls in one of k clades uniformly and independently.
std::array<Fraction, 5> theoretical_partition_proportions(std::uint64_t k);

/// P(2,2) + P(2,1,1).
Fraction resolvable_fraction(std::uint64_t k);

struct KnownCounts {
  std::uint64_t total = 0;
  std::uint64_t two_two = 0;
  std::uint64_t two_one_one = 0;

  std::uint64_t known() const noexcept { return two_two + two_one_one; }
  std::uint64_t unknown() const noexcept { return total - known(); }
  double known_fraction() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(known()) / static_cast<double>(total);
  }
};

/// Exact counts of resolvable quartets for the given clade sizes.
KnownCounts exact_known_counts(const std::vector<std::uint64_t>& clade_sizes);
KnownCounts exact_known_counts(const Tree& tree, std::size_t level);

/// Unknown-quartet fraction of a balanced binary tree cut at level L:
/// 1/2^(3L) + 1/2^(2L-2) for L > 1 and 0.625 for L = 1. With `exact_n`, the
/// exact fraction for 2^L equal clades of exact_n / 2^L leaves instead.
double balanced_unknown_fraction(std::size_t level, std::optional<std::uint64_t> exact_n = std::nullopt);

struct LabelFractions {
  double known = 0.0;
  double partial = 0.0;
  double unknown = 0.0;
  /// Present for the exact variant.
  std::optional<std::uint64_t> known_count, partial_count, unknown_count, labeled;
};

/// Asymptotic kappa^4 / remainder / (1-kappa)^4, or the exact counts
/// C(l,4), C(n,4) - C(l,4) - C(n-l,4), C(n-l,4) with l = labeled_leaf_count.
LabelFractions labeled_fraction_curve(double kappa, std::optional<std::uint64_t> n = std::nullopt);

}  // namespace quartree
