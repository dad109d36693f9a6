#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quartree/distance_matrix.hpp"
#include "quartree/feature_table.hpp"
#include "quartree/rng.hpp"
#include "quartree/tree.hpp"

namespace quartree {

enum class TopologyKind : std::uint8_t { Balanced, Random };

struct SimulationConfig {
  std::size_t n_leaves = 64;
  TopologyKind topology = TopologyKind::Balanced;
  double w_max = 2.0;
  std::size_t n_signal = 20;
  std::size_t n_noise = 20;
  /// Columns per alternative tree.
  std::size_t n_altsig = 0;
  /// Noise SD is alpha times the mean signal SD.
  double alpha = 0.5;
  /// Alternative-tree edges have maximum length beta * w_max.
  double beta = 0.5;
  std::vector<double> alt_partitions{1.0};
  std::size_t n_alt_trees_per_partition = 1;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
  std::size_t total_features() const noexcept;
};

struct Dataset {
  Tree tree;
  FeatureTable train;
  FeatureTable test;
  std::vector<Tree> alt_trees;
};

/// Rooted perfectly balanced binary tree with 2^depth leaves "L0".."L{n-1}"
/// (left to right) and unit edge lengths.
Tree full_binary_topology(std::size_t depth);

/// Rooted binary tree grown from a cherry by repeatedly splitting a uniformly
/// chosen pendant edge until `n_leaves` leaves exist. Unit edge lengths.
Tree random_binary_topology(std::size_t n_leaves, std::uint64_t seed,
                            const std::vector<std::string>& labels = {});

/// Leaf labels "L0".."L{n-1}".
std::vector<std::string> default_leaf_labels(std::size_t n);

/// Copy of `tree` whose edge lengths are i.i.d. Uniform(lo, hi).
Tree sample_edge_lengths(const Tree& tree, double lo, double hi, Rng& rng);
Tree sample_edge_lengths(const Tree& tree, double w_max, std::uint64_t seed);

/// Brownian motion from a zero root state: each child adds an independent
/// N(0, edge length) increment per feature. Rows follow the tree's leaf order;
/// columns are named `prefix0`, `prefix1`, ...
FeatureTable brownian_signals(const Tree& tree, std::size_t n_features, Rng& rng,
                              FeatureRole role = FeatureRole::Signal, const std::string& prefix = "sig");
FeatureTable brownian_signals(const Tree& tree, std::size_t n_features, std::uint64_t seed);

/// Mean over columns of the per-column population standard deviation.
double mean_column_sd(const FeatureTable& table);

/// I.i.d. N(0, (alpha * sigma_bar)^2) entries.
FeatureTable gaussian_noise_features(const std::vector<std::string>& rows, std::size_t n_noise, double alpha,
                                     double sigma_bar_signal, Rng& rng);
FeatureTable gaussian_noise_features(std::size_t n_leaves, std::size_t n_noise, double alpha,
                                     double sigma_bar_signal, std::uint64_t seed);

struct AltTreeNoise {
  FeatureTable features;
  std::vector<Tree> trees;
  /// Member leaves (row indices) of each alternative tree.
  std::vector<std::vector<std::size_t>> members;
};

/// Splits the leaves into contiguous blocks of a seeded random order with
/// sizes proportional to `config.alt_partitions`, grows
/// `n_alt_trees_per_partition` random binary trees per block with lengths
/// Uniform(min(1, beta*w_max), beta*w_max), and runs Brownian motion on each
/// for `n_altsig` columns. Rows outside a block get i.i.d. N(0, sigma_bar^2).
AltTreeNoise alternative_tree_noise(const std::vector<std::string>& leaves, const SimulationConfig& config,
                                    double sigma_bar_signal, Rng& rng);

/// Brownian features on previously built alternative trees; used to draw a
/// fresh replicate that shares the confounding topology.
FeatureTable alternative_tree_features(const std::vector<std::string>& leaves, const AltTreeNoise& layout,
                                       std::size_t n_altsig, double sigma_bar_signal, Rng& rng);

/// `signals` plus independent N(0, (0.1 * mean_column_sd(signals))^2).
FeatureTable make_supervised_replicate(const FeatureTable& signals, Rng& rng);
FeatureTable make_supervised_replicate(const FeatureTable& signals, std::uint64_t seed);

/// Full pipeline: topology, lengths, signals, train/test replicates, and
/// independent noise and alternative-tree columns appended to each replicate.
/// Column order is signal, noise, altsig.
Dataset simulate_dataset(const SimulationConfig& config);

/// Mean over replicates of squared Euclidean row distances.
DistanceMatrix empirical_distance_matrix(const std::vector<FeatureTable>& replicates);

}  // namespace quartree
