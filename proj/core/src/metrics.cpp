#include "quartree/metrics.hpp"

#include <algorithm>
#include <array>
#include <iterator>
#include <thread>

#include "quartree/error.hpp"

namespace quartree {

namespace {

Tree aligned_to(const Tree& reference, const Tree& other) {
  if (reference.leaf_count() != other.leaf_count()) throw InvalidArgumentError("trees have different leaf sets");
  try {
    return other.with_leaf_order(reference.leaf_labels());
  } catch (const InvalidArgumentError&) {
    throw InvalidArgumentError("trees have different leaf sets");
  }
}

// Per-class counts of evaluated and differing quartets.
struct Tally {
  std::array<std::uint64_t, 3> evaluated{};
  std::array<std::uint64_t, 3> differing{};

  Tally& operator+=(const Tally& o) {
    for (std::size_t c = 0; c < 3; ++c) {
      evaluated[c] += o.evaluated[c];
      differing[c] += o.differing[c];
    }
    return *this;
  }
};

using Stratum = std::function<LabelClass(const Quartet&)>;

Tally tally_range(const QuartetTopologyIndex& a, const QuartetTopologyIndex& b, const Stratum& stratum,
                  QuartetIterator it, std::uint64_t count) {
  Tally t;
  for (std::uint64_t k = 0; k < count; ++k, ++it) {
    const Quartet& q = *it;
    const auto c = static_cast<std::size_t>(stratum ? stratum(q) : LabelClass::Known);
    ++t.evaluated[c];
    if (a(q) != b(q)) ++t.differing[c];
  }
  return t;
}

struct Evaluation {
  Tally tally;
  bool exact = true;
};

Evaluation evaluate_quartets(const Tree& t1, const Tree& t2, const QdMode& mode, const Stratum& stratum) {
  const std::size_t n = t1.leaf_count();
  if (n < 4) throw DegenerateInputError("quartet distance needs at least 4 leaves");
  const Tree aligned = aligned_to(t1, t2);
  const QuartetTopologyIndex a(t1);
  const QuartetTopologyIndex b(aligned);
  const std::uint64_t total = quartet_count(n);
  Evaluation out;

  if (total > mode.exact_limit) {
    out.exact = false;
    const auto sample = sample_quartets(n, static_cast<std::size_t>(std::min<std::uint64_t>(mode.samples, total)), mode.seed);
    for (const auto& q : sample) {
      const auto c = static_cast<std::size_t>(stratum ? stratum(q) : LabelClass::Known);
      ++out.tally.evaluated[c];
      if (a(q) != b(q)) ++out.tally.differing[c];
    }
    return out;
  }

  const std::size_t threads = std::clamp<std::size_t>(mode.threads, 1, 64);
  const auto range = enumerate_quartets(n);
  if (threads == 1) {
    out.tally = tally_range(a, b, stratum, range.begin(), total);
    return out;
  }
  // Contiguous rank chunks; integer sums make the reduction order-free.
  std::vector<Tally> partial(threads);
  std::vector<std::thread> pool;
  const std::uint64_t chunk = (total + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::uint64_t lo = std::min(total, t * chunk);
    const std::uint64_t hi = std::min(total, lo + chunk);
    if (lo == hi) continue;
    pool.emplace_back([&, t, lo, hi] {
      const auto start = QuartetIterator::at(static_cast<std::uint32_t>(n), quartet_unrank(lo));
      partial[t] = tally_range(a, b, stratum, start, hi - lo);
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& p : partial) out.tally += p;
  return out;
}

}  // namespace

double rf_distance(const Tree& t1, const Tree& t2) {
  const Tree aligned = aligned_to(t1, t2);
  const auto b1 = bipartitions(t1);
  const auto b2 = bipartitions(aligned);
  if (b1.empty() && b2.empty()) return 0.0;
  std::vector<Bipartition> diff;
  std::set_symmetric_difference(b1.begin(), b1.end(), b2.begin(), b2.end(), std::back_inserter(diff));
  return static_cast<double>(diff.size()) / static_cast<double>(b1.size() + b2.size());
}

QdResult quartet_distance_detailed(const Tree& t1, const Tree& t2, const QdMode& mode) {
  const auto e = evaluate_quartets(t1, t2, mode, {});
  QdResult r;
  r.exact = e.exact;
  for (std::size_t c = 0; c < 3; ++c) {
    r.evaluated += e.tally.evaluated[c];
    r.differing += e.tally.differing[c];
  }
  r.qd = r.evaluated == 0 ? 0.0 : static_cast<double>(r.differing) / static_cast<double>(r.evaluated);
  return r;
}

double quartet_distance(const Tree& t1, const Tree& t2, const QdMode& mode) {
  return quartet_distance_detailed(t1, t2, mode).qd;
}

std::map<LabelClass, double> stratified_qd(const Tree& t1, const Tree& t2, const Stratum& stratum, const QdMode& mode) {
  if (!stratum) throw InvalidArgumentError("stratified_qd: no stratum function");
  const auto e = evaluate_quartets(t1, t2, mode, stratum);
  std::map<LabelClass, double> out;
  for (std::size_t c = 0; c < 3; ++c) {
    if (e.tally.evaluated[c] == 0) continue;
    out[static_cast<LabelClass>(c)] =
        static_cast<double>(e.tally.differing[c]) / static_cast<double>(e.tally.evaluated[c]);
  }
  return out;
}

double delta_percent(double base, double recon) {
  if (base == 0.0) throw InvalidArgumentError("delta_percent: baseline is zero, improvement undefined");
  return (base - recon) / base;
}

EvalReport evaluate_trees(const Tree& reference, const Tree& estimate, const QdMode& mode, const Stratum& stratum) {
  EvalReport report;
  report.rf = rf_distance(reference, estimate);
  const auto qd = quartet_distance_detailed(reference, estimate, mode);
  report.qd = qd.qd;
  report.qd_exact = qd.exact;
  report.qd_samples = qd.exact ? 0 : static_cast<std::size_t>(qd.evaluated);
  report.qd_seed = mode.seed;
  if (stratum) report.stratified = stratified_qd(reference, estimate, stratum, mode);
  return report;
}

}  // namespace quartree
