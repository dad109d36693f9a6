#include "quartree/quartets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "quartree/error.hpp"
#include "quartree/rng.hpp"

namespace quartree {

__extension__ typedef unsigned __int128 u128;

std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  u128 r = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    r = r * (n - i) / (i + 1);
    if (r > std::numeric_limits<std::uint64_t>::max()) throw NumericalError("choose: result exceeds 64 bits");
  }
  return static_cast<std::uint64_t>(r);
}

std::uint64_t quartet_rank(const Quartet& q) {
  return q[0] + choose(q[1], 2) + choose(q[2], 3) + choose(q[3], 4);
}

Quartet quartet_unrank(std::uint64_t rank) {
  Quartet q{};
  for (int k = 4; k >= 1; --k) {
    // Largest x with C(x, k) <= rank.
    double factorial = 1.0;
    for (int i = 2; i <= k; ++i) factorial *= i;
    auto x = static_cast<std::uint64_t>(std::pow(static_cast<double>(rank) * factorial, 1.0 / k)) + k - 1;
    while (choose(x, static_cast<std::uint64_t>(k)) > rank) --x;
    while (choose(x + 1, static_cast<std::uint64_t>(k)) <= rank) ++x;
    q.leaves[static_cast<std::size_t>(k - 1)] = static_cast<std::uint32_t>(x);
    rank -= choose(x, static_cast<std::uint64_t>(k));
  }
  return q;
}

QuartetIterator::QuartetIterator(std::uint32_t n, bool end) : n_(n), current_{{0, 1, 2, 3}}, done_(end || n < 4) {}

QuartetIterator& QuartetIterator::operator++() noexcept {
  for (std::size_t i = 0; i < 4; ++i) {
    const std::uint32_t limit = i == 3 ? n_ : current_.leaves[i + 1];
    if (current_.leaves[i] + 1 < limit) {
      ++current_.leaves[i];
      for (std::size_t j = 0; j < i; ++j) current_.leaves[j] = static_cast<std::uint32_t>(j);
      return *this;
    }
  }
  done_ = true;
  return *this;
}

QuartetRange enumerate_quartets(std::size_t n) {
  if (n < 4) throw DegenerateInputError("enumerate_quartets: need at least 4 leaves");
  if (n > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgumentError("enumerate_quartets: n too large");
  return QuartetRange{static_cast<std::uint32_t>(n)};
}

std::vector<Quartet> sample_quartets(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (n < 4) throw DegenerateInputError("sample_quartets: need at least 4 leaves");
  const std::uint64_t total = quartet_count(n);
  if (count > total) throw InvalidArgumentError("sample_quartets: count exceeds C(n, 4)");
  // Floyd's algorithm draws `count` distinct ranks with `count` random numbers.
  Rng rng = Rng(seed).split("quartets");
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(count * 2);
  for (std::uint64_t j = total - count; j < total; ++j) {
    const std::uint64_t t = rng.below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> ranks(chosen.begin(), chosen.end());
  std::sort(ranks.begin(), ranks.end());
  std::vector<Quartet> out;
  out.reserve(ranks.size());
  for (auto r : ranks) out.push_back(quartet_unrank(r));
  return out;
}

double QuartetSums::of(QuartetTopology t) const {
  switch (t) {
    case QuartetTopology::AbCd: return s1;
    case QuartetTopology::AcBd: return s2;
    case QuartetTopology::AdBc: return s3;
    case QuartetTopology::Unresolved: break;
  }
  throw InvalidArgumentError("QuartetSums: unresolved topology has no sum");
}

QuartetSums distance_sums(const DistanceMatrix& m, const Quartet& q) {
  const auto a = q[0], b = q[1], c = q[2], d = q[3];
  return {m(a, b) + m(c, d), m(a, c) + m(b, d), m(a, d) + m(b, c)};
}

// ---------------------------------------------------------------------------
// PartitionPrior

std::string_view to_string(Composition c) noexcept {
  switch (c) {
    case Composition::Four: return "(4)";
    case Composition::ThreeOne: return "(3,1)";
    case Composition::TwoTwo: return "(2,2)";
    case Composition::TwoOneOne: return "(2,1,1)";
    case Composition::OneOneOneOne: return "(1,1,1,1)";
  }
  return "?";
}

PartitionPrior::PartitionPrior(std::vector<std::uint32_t> clade_of, std::optional<std::size_t> level)
    : clade_of_(std::move(clade_of)), level_(level) {
  if (clade_of_.empty()) throw InvalidArgumentError("partition prior: no leaves");
  k_ = static_cast<std::size_t>(*std::max_element(clade_of_.begin(), clade_of_.end())) + 1;
  std::vector<bool> used(k_, false);
  for (auto c : clade_of_) used[c] = true;
  if (std::find(used.begin(), used.end(), false) != used.end()) {
    throw InvalidArgumentError("partition prior: clade ids must be dense 0..k-1");
  }
  if (k_ < 2) throw InvalidArgumentError("partition prior: need at least 2 clades");
}

PartitionPrior PartitionPrior::from_tree(const Tree& tree, std::size_t level) {
  if (level < 1) throw InvalidArgumentError("partition prior: level must be at least 1");
  if (!tree.rooted()) throw InvalidArgumentError("partition prior: tree must be rooted");
  std::vector<std::size_t> depth(tree.node_count(), 0);
  std::vector<std::uint32_t> clade_node(tree.node_count(), 0);
  std::vector<NodeId> cut_nodes;
  for (NodeId v : tree.preorder()) {
    if (v != tree.root()) depth[v] = depth[tree.parent(v)] + 1;
    if (depth[v] < level) {
      if (tree.children(v).size() != 2) {
        throw InvalidArgumentError(tree.is_leaf(v) ? "partition prior: tree is shallower than the requested level"
                                                   : "partition prior: tree is not binary above the requested level");
      }
    } else if (depth[v] == level) {
      clade_node[v] = static_cast<std::uint32_t>(cut_nodes.size());
      cut_nodes.push_back(v);
    } else {
      clade_node[v] = clade_node[tree.parent(v)];
    }
  }
  // Renumber clades by their smallest leaf index.
  std::vector<std::uint32_t> raw(tree.leaf_count());
  for (std::size_t i = 0; i < tree.leaf_count(); ++i) raw[i] = clade_node[tree.leaf_node(i)];
  std::vector<std::uint32_t> dense(cut_nodes.size(), std::numeric_limits<std::uint32_t>::max());
  std::uint32_t next = 0;
  for (auto& c : raw) {
    if (dense[c] == std::numeric_limits<std::uint32_t>::max()) dense[c] = next++;
    c = dense[c];
  }
  return PartitionPrior(std::move(raw), level);
}

std::vector<std::uint64_t> PartitionPrior::clade_sizes() const {
  std::vector<std::uint64_t> sizes(k_, 0);
  for (auto c : clade_of_) ++sizes[c];
  return sizes;
}

PartitionClass classify_by_partition(const Quartet& q, const PartitionPrior& prior) {
  std::array<std::uint32_t, 4> c{};
  for (std::size_t i = 0; i < 4; ++i) c[i] = prior.clade_of(q[i]);
  std::sort(c.begin(), c.end());
  std::array<int, 4> runs{};
  std::size_t r = 0;
  runs[0] = 1;
  for (std::size_t i = 1; i < 4; ++i) {
    if (c[i] == c[i - 1]) {
      ++runs[r];
    } else {
      runs[++r] = 1;
    }
  }
  std::sort(runs.begin(), runs.begin() + static_cast<std::ptrdiff_t>(r + 1), std::greater<>());
  if (runs[0] == 4) return {Composition::Four, false};
  if (runs[0] == 3) return {Composition::ThreeOne, false};
  if (runs[0] == 2 && runs[1] == 2) return {Composition::TwoTwo, true};
  if (runs[0] == 2) return {Composition::TwoOneOne, true};
  return {Composition::OneOneOneOne, false};
}

QuartetTopology resolve_from_partition(const Quartet& q, const PartitionPrior& prior) {
  if (!classify_by_partition(q, prior).known) {
    throw InvalidArgumentError("resolve_from_partition: quartet is not resolvable under the prior");
  }
  const auto same = [&](int i, int j) { return prior.clade_of(q[i]) == prior.clade_of(q[j]); };
  if (same(0, 1) || same(2, 3)) return QuartetTopology::AbCd;
  if (same(0, 2) || same(1, 3)) return QuartetTopology::AcBd;
  return QuartetTopology::AdBc;
}

// ---------------------------------------------------------------------------
// LabelPrior

std::string_view to_string(LabelClass c) noexcept {
  switch (c) {
    case LabelClass::Known: return "known";
    case LabelClass::Partial: return "partial";
    case LabelClass::Unknown: return "unknown";
  }
  return "?";
}

LabelPrior::LabelPrior(std::vector<bool> labeled)
    : labeled_(std::move(labeled)), count_(static_cast<std::size_t>(std::count(labeled_.begin(), labeled_.end(), true))) {}

LabelPrior LabelPrior::random(std::size_t n, double kappa, std::uint64_t seed) {
  const std::size_t l = labeled_leaf_count(kappa, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).split("labels");
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<bool> labeled(n, false);
  for (std::size_t i = 0; i < l; ++i) labeled[order[i]] = true;
  return LabelPrior(std::move(labeled));
}

double LabelPrior::kappa() const noexcept {
  return labeled_.empty() ? 0.0 : static_cast<double>(count_) / static_cast<double>(labeled_.size());
}

std::vector<std::size_t> LabelPrior::labeled_leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labeled_.size(); ++i) {
    if (labeled_[i]) out.push_back(i);
  }
  return out;
}

LabelClass classify_by_labels(const Quartet& q, const LabelPrior& prior) {
  int labeled = 0;
  for (std::size_t i = 0; i < 4; ++i) labeled += prior.is_labeled(q[i]) ? 1 : 0;
  if (labeled == 4) return LabelClass::Known;
  if (labeled == 0) return LabelClass::Unknown;
  return LabelClass::Partial;
}

std::size_t labeled_leaf_count(double kappa, std::size_t n) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw InvalidArgumentError("kappa must lie in [0, 1]");
  return std::min(n, static_cast<std::size_t>(std::floor(kappa * static_cast<double>(n) + 1e-9)));
}

// ---------------------------------------------------------------------------
// Exact combinatorics

Fraction Fraction::make(std::uint64_t num, std::uint64_t den) {
  if (den == 0) throw InvalidArgumentError("fraction with zero denominator");
  const std::uint64_t g = std::gcd(num, den);
  return g == 0 ? Fraction{0, 1} : Fraction{num / g, den / g};
}

Fraction Fraction::operator+(const Fraction& other) const {
  const std::uint64_t g = std::gcd(den, other.den);
  const std::uint64_t scale = other.den / g;
  std::uint64_t lhs = 0, rhs = 0, den_out = 0, sum = 0;
  if (__builtin_mul_overflow(num, scale, &lhs) || __builtin_mul_overflow(other.num, den / g, &rhs) ||
      __builtin_mul_overflow(den, scale, &den_out) || __builtin_add_overflow(lhs, rhs, &sum)) {
    throw NumericalError("fraction arithmetic overflow");
  }
  return make(sum, den_out);
}

std::array<Fraction, 5> theoretical_partition_proportions(std::uint64_t k) {
  if (k < 2) throw InvalidArgumentError("theoretical_partition_proportions: k must be at least 2");
  const std::uint64_t k3 = k * k * k;
  return {Fraction::make(1, k3), Fraction::make(4 * (k - 1), k3), Fraction::make(3 * (k - 1), k3),
          Fraction::make(6 * (k - 1) * (k - 2), k3), Fraction::make((k - 1) * (k - 2) * (k - 3), k3)};
}

Fraction resolvable_fraction(std::uint64_t k) {
  const auto p = theoretical_partition_proportions(k);
  return p[2] + p[3];
}

KnownCounts exact_known_counts(const std::vector<std::uint64_t>& sizes) {
  KnownCounts out;
  std::uint64_t n = 0;
  for (auto s : sizes) {
    if (s == 0) throw InvalidArgumentError("exact_known_counts: clade sizes must be positive");
    n += s;
  }
  out.total = quartet_count(n);
  const std::size_t k = sizes.size();
  for (std::size_t a = 0; a < k; ++a) {
    const std::uint64_t pairs_a = choose(sizes[a], 2);
    for (std::size_t b = a + 1; b < k; ++b) out.two_two += pairs_a * choose(sizes[b], 2);
    // Pairs of leaves drawn from two different clades other than a.
    std::uint64_t rest = 0, rest_sq = 0;
    for (std::size_t b = 0; b < k; ++b) {
      if (b == a) continue;
      rest += sizes[b];
      rest_sq += sizes[b] * sizes[b];
    }
    out.two_one_one += pairs_a * ((rest * rest - rest_sq) / 2);
  }
  return out;
}

KnownCounts exact_known_counts(const Tree& tree, std::size_t level) {
  return exact_known_counts(PartitionPrior::from_tree(tree, level).clade_sizes());
}

double balanced_unknown_fraction(std::size_t level, std::optional<std::uint64_t> exact_n) {
  if (level < 1) throw InvalidArgumentError("balanced_unknown_fraction: level must be at least 1");
  if (exact_n) {
    const std::uint64_t k = std::uint64_t{1} << level;
    if (*exact_n % k != 0 || *exact_n / k == 0) {
      throw InvalidArgumentError("balanced_unknown_fraction: n must be a positive multiple of 2^L");
    }
    const auto counts = exact_known_counts(std::vector<std::uint64_t>(k, *exact_n / k));
    return 1.0 - counts.known_fraction();
  }
  if (level == 1) return 0.625;
  return std::ldexp(1.0, -3 * static_cast<int>(level)) + std::ldexp(1.0, 2 - 2 * static_cast<int>(level));
}

LabelFractions labeled_fraction_curve(double kappa, std::optional<std::uint64_t> n) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw InvalidArgumentError("kappa must lie in [0, 1]");
  LabelFractions out;
  if (!n) {
    out.known = std::pow(kappa, 4);
    out.unknown = std::pow(1.0 - kappa, 4);
    out.partial = 1.0 - out.known - out.unknown;
    return out;
  }
  const std::uint64_t l = labeled_leaf_count(kappa, *n);
  const std::uint64_t total = quartet_count(*n);
  out.labeled = l;
  out.known_count = choose(l, 4);
  out.unknown_count = choose(*n - l, 4);
  out.partial_count = total - *out.known_count - *out.unknown_count;
  const double t = static_cast<double>(total);
  out.known = static_cast<double>(*out.known_count) / t;
  out.partial = static_cast<double>(*out.partial_count) / t;
  out.unknown = static_cast<double>(*out.unknown_count) / t;
  return out;
}

}  // namespace quartree
