#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "quartree/quartets.hpp"
#include "quartree/tree.hpp"

namespace quartree {

/// Normalized Robinson-Foulds distance |B1 ^ B2| / (|B1| + |B2|) over
/// nontrivial bipartitions of the unrooted views; 0 when both sets are empty.
/// Throws InvalidArgumentError when the leaf label sets differ.
double rf_distance(const Tree& t1, const Tree& t2);

struct QdMode {
  /// Enumerate every quartet when C(n,4) is at most this many.
  std::uint64_t exact_limit = 2'000'000;
  std::size_t samples = 100'000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct QdResult {
  double qd = 0.0;
  bool exact = true;
  std::uint64_t evaluated = 0;
  std::uint64_t differing = 0;
};

/// Fraction of quartets whose induced topologies differ; an unresolved
/// quartet differs from every resolved one and equals another unresolved one.
QdResult quartet_distance_detailed(const Tree& t1, const Tree& t2, const QdMode& mode = {});
double quartet_distance(const Tree& t1, const Tree& t2, const QdMode& mode = {});

/// Per-class fractions of differing quartets over the quartets of classes
/// assigned by `stratum`, indexed by the leaf order of `t1`. Classes with no
/// members are absent. Uses the same exact/sampled rule as quartet_distance.
std::map<LabelClass, double> stratified_qd(const Tree& t1, const Tree& t2,
                                           const std::function<LabelClass(const Quartet&)>& stratum,
                                           const QdMode& mode = {});

/// (base - recon) / base; throws InvalidArgumentError when base is 0.
double delta_percent(double base, double recon);

struct EvalReport {
  double rf = 0.0;
  double qd = 0.0;
  std::optional<double> delta_rf;
  std::optional<double> delta_qd;
  std::map<LabelClass, double> stratified;
  bool qd_exact = true;
  std::size_t qd_samples = 0;
  std::uint64_t qd_seed = 0;
};

/// RF and QD of `estimate` against `reference`, plus stratified QDs when a
/// stratum function is given.
EvalReport evaluate_trees(const Tree& reference, const Tree& estimate, const QdMode& mode = {},
                          const std::function<LabelClass(const Quartet&)>& stratum = {});

}  // namespace quartree
