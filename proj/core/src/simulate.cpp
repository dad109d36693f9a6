#include "quartree/simulate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "quartree/error.hpp"

namespace quartree {

void SimulationConfig::validate() const {
  if (n_leaves < 4) throw ConfigError("simulation: n_leaves must be at least 4");
  if (topology == TopologyKind::Balanced && !std::has_single_bit(n_leaves)) {
    throw ConfigError("simulation: a balanced topology needs a power-of-two leaf count");
  }
  if (!(w_max > 1.0) || !std::isfinite(w_max)) throw ConfigError("simulation: w_max must exceed 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("simulation: alpha must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("simulation: beta must be >= 0");
  if (n_altsig > 0) {
    if (alt_partitions.empty()) throw ConfigError("simulation: alt_partitions is empty");
    double total = 0.0;
    for (double f : alt_partitions) {
      if (!(f > 0.0)) throw ConfigError("simulation: partition fractions must be positive");
      total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("simulation: partition fractions must sum to 1");
    if (n_alt_trees_per_partition == 0) throw ConfigError("simulation: n_alt_trees_per_partition must be >= 1");
  }
}

std::size_t SimulationConfig::total_features() const noexcept {
  return n_signal + n_noise + n_altsig * alt_partitions.size() * n_alt_trees_per_partition;
}

std::vector<std::string> default_leaf_labels(std::size_t n) {
  std::vector<std::string> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = "L" + std::to_string(i);
  return labels;
}

Tree full_binary_topology(std::size_t depth) {
  if (depth < 1 || depth > 24) throw InvalidArgumentError("full_binary_topology: depth out of range");
  std::vector<NodeId> parent{kNoNode};
  std::vector<NodeId> level{0};
  for (std::size_t d = 0; d < depth; ++d) {
    std::vector<NodeId> next;
    next.reserve(level.size() * 2);
    for (NodeId v : level) {
      for (int side = 0; side < 2; ++side) {
        next.push_back(static_cast<NodeId>(parent.size()));
        parent.push_back(v);
      }
    }
    level = std::move(next);
  }
  std::vector<std::string> label(parent.size());
  for (std::size_t i = 0; i < level.size(); ++i) label[level[i]] = "L" + std::to_string(i);
  std::vector<double> length(parent.size(), 1.0);
  return Tree(std::move(parent), std::move(length), std::move(label), true);
}

Tree random_binary_topology(std::size_t n_leaves, std::uint64_t seed, const std::vector<std::string>& labels) {
  if (n_leaves < 2) throw InvalidArgumentError("random_binary_topology: need at least 2 leaves");
  if (!labels.empty() && labels.size() != n_leaves) {
    throw InvalidArgumentError("random_binary_topology: label count differs from n_leaves");
  }
  Rng rng = Rng(seed).split("topology");
  std::vector<NodeId> parent{kNoNode, 0, 0};
  std::vector<NodeId> pendant{1, 2};
  while (pendant.size() < n_leaves) {
    const std::size_t pick = static_cast<std::size_t>(rng.below(pendant.size()));
    const NodeId v = pendant[pick];
    const auto a = static_cast<NodeId>(parent.size());
    parent.push_back(v);
    parent.push_back(v);
    pendant[pick] = a;
    pendant.push_back(a + 1);
  }
  std::vector<std::string> names = labels.empty() ? default_leaf_labels(n_leaves) : labels;
  std::vector<std::string> shuffled = names;
  rng.shuffle(std::span<std::string>(shuffled));
  std::vector<std::string> label(parent.size());
  for (std::size_t i = 0; i < pendant.size(); ++i) label[pendant[i]] = shuffled[i];
  std::vector<double> length(parent.size(), 1.0);
  return Tree(std::move(parent), std::move(length), std::move(label), true).with_leaf_order(names);
}

Tree sample_edge_lengths(const Tree& tree, double lo, double hi, Rng& rng) {
  if (!(lo >= 0.0) || !(hi >= lo)) throw InvalidArgumentError("sample_edge_lengths: need 0 <= lo <= hi");
  Tree out = tree;
  for (NodeId v = 0; v < tree.node_count(); ++v) {
    if (v == tree.root()) continue;
    out.set_length(v, lo == hi ? lo : rng.uniform(lo, hi));
  }
  return out;
}

Tree sample_edge_lengths(const Tree& tree, double w_max, std::uint64_t seed) {
  if (!(w_max >= 1.0)) throw InvalidArgumentError("sample_edge_lengths: w_max must be at least 1");
  Rng rng = Rng(seed).split("lengths");
  return sample_edge_lengths(tree, 1.0, w_max, rng);
}

namespace {

std::vector<std::string> numbered(const std::string& prefix, std::size_t count, std::size_t offset = 0) {
  std::vector<std::string> out(count);
  for (std::size_t j = 0; j < count; ++j) out[j] = prefix + std::to_string(offset + j);
  return out;
}

}  // namespace

FeatureTable brownian_signals(const Tree& tree, std::size_t n_features, Rng& rng, FeatureRole role,
                              const std::string& prefix) {
  const auto d = static_cast<Eigen::Index>(n_features);
  Eigen::MatrixXd state(static_cast<Eigen::Index>(tree.node_count()), d);
  for (NodeId v : tree.preorder()) {
    if (v == tree.root()) {
      state.row(v).setZero();
      continue;
    }
    const double sd = std::sqrt(tree.length(v));
    for (Eigen::Index j = 0; j < d; ++j) state(v, j) = state(tree.parent(v), j) + sd * rng.normal();
  }
  Eigen::MatrixXd leaves(static_cast<Eigen::Index>(tree.leaf_count()), d);
  for (std::size_t i = 0; i < tree.leaf_count(); ++i) {
    leaves.row(static_cast<Eigen::Index>(i)) = state.row(tree.leaf_node(i));
  }
  return FeatureTable(tree.leaf_labels(), numbered(prefix, n_features), std::move(leaves),
                      std::vector<FeatureRole>(n_features, role));
}

FeatureTable brownian_signals(const Tree& tree, std::size_t n_features, std::uint64_t seed) {
  Rng rng = Rng(seed).split("signal");
  return brownian_signals(tree, n_features, rng);
}

double mean_column_sd(const FeatureTable& table) {
  const auto& x = table.values();
  if (x.cols() == 0 || x.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    total += std::sqrt((x.col(j).array() - mean).square().mean());
  }
  return total / static_cast<double>(x.cols());
}

FeatureTable gaussian_noise_features(const std::vector<std::string>& rows, std::size_t n_noise, double alpha,
                                     double sigma_bar_signal, Rng& rng) {
  if (!(alpha >= 0.0)) throw InvalidArgumentError("gaussian_noise_features: alpha must be >= 0");
  const double sd = alpha * sigma_bar_signal;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_noise));
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) values(i, j) = sd * rng.normal();
  }
  return FeatureTable(rows, numbered("noise", n_noise), std::move(values),
                      std::vector<FeatureRole>(n_noise, FeatureRole::Noise));
}

FeatureTable gaussian_noise_features(std::size_t n_leaves, std::size_t n_noise, double alpha,
                                     double sigma_bar_signal, std::uint64_t seed) {
  Rng rng = Rng(seed).split("noise");
  return gaussian_noise_features(default_leaf_labels(n_leaves), n_noise, alpha, sigma_bar_signal, rng);
}

namespace {

// Largest-remainder apportionment of n items by fractions.
std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& fractions) {
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t used = 0;
  for (std::size_t p = 0; p < fractions.size(); ++p) {
    const double exact = fractions[p] * static_cast<double>(n);
    sizes[p] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    used += sizes[p];
    remainders.emplace_back(-(exact - static_cast<double>(sizes[p])), p);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t k = 0; used < n; ++k, ++used) ++sizes[remainders[k % remainders.size()].second];
  return sizes;
}

}  // namespace

FeatureTable alternative_tree_features(const std::vector<std::string>& leaves, const AltTreeNoise& layout,
                                       std::size_t n_altsig, double sigma_bar_signal, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(leaves.size());
  const auto d = static_cast<Eigen::Index>(n_altsig);
  Eigen::MatrixXd values(n, d * static_cast<Eigen::Index>(layout.trees.size()));
  for (std::size_t t = 0; t < layout.trees.size(); ++t) {
    const auto block = static_cast<Eigen::Index>(t) * d;
    Rng stream = rng.split(t);
    const FeatureTable member_values = brownian_signals(layout.trees[t], n_altsig, stream, FeatureRole::AltSignal);
    std::vector<bool> is_member(leaves.size(), false);
    for (std::size_t k = 0; k < layout.members[t].size(); ++k) {
      const std::size_t row = layout.members[t][k];
      is_member[row] = true;
      // Alt-trees carry the member labels in the order of `members`.
      values.block(static_cast<Eigen::Index>(row), block, 1, d) =
          member_values.values().row(static_cast<Eigen::Index>(k));
    }
    for (std::size_t row = 0; row < leaves.size(); ++row) {
      if (is_member[row]) continue;
      for (Eigen::Index j = 0; j < d; ++j) values(static_cast<Eigen::Index>(row), block + j) = sigma_bar_signal * stream.normal();
    }
  }
  const std::size_t total = n_altsig * layout.trees.size();
  return FeatureTable(leaves, numbered("alt", total), std::move(values),
                      std::vector<FeatureRole>(total, FeatureRole::AltSignal));
}

AltTreeNoise alternative_tree_noise(const std::vector<std::string>& leaves, const SimulationConfig& config,
                                    double sigma_bar_signal, Rng& rng) {
  AltTreeNoise out;
  if (config.n_altsig == 0) {
    out.features = FeatureTable(leaves, {}, Eigen::MatrixXd(static_cast<Eigen::Index>(leaves.size()), 0), {});
    return out;
  }
  std::vector<std::size_t> order(leaves.size());
  std::iota(order.begin(), order.end(), 0);
  Rng layout_rng = rng.split("layout");
  layout_rng.shuffle(std::span<std::size_t>(order));
  const auto sizes = apportion(leaves.size(), config.alt_partitions);
  const double w_alt = config.beta * config.w_max;
  std::size_t start = 0;
  for (std::size_t p = 0; p < sizes.size(); ++p) {
    if (sizes[p] < 4) {
      throw DegenerateInputError("alternative_tree_noise: partition " + std::to_string(p) + " has " +
                                 std::to_string(sizes[p]) + " leaves (need at least 4)");
    }
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(start + sizes[p]));
    std::sort(members.begin(), members.end());
    start += sizes[p];
    std::vector<std::string> names;
    for (std::size_t m : members) names.push_back(leaves[m]);
    for (std::size_t t = 0; t < config.n_alt_trees_per_partition; ++t) {
      const Tree shape = random_binary_topology(names.size(), layout_rng(), names);
      out.trees.push_back(sample_edge_lengths(shape, std::min(1.0, w_alt), w_alt, layout_rng));
      out.members.push_back(members);
    }
  }
  Rng feature_rng = rng.split("features");
  out.features = alternative_tree_features(leaves, out, config.n_altsig, sigma_bar_signal, feature_rng);
  return out;
}

FeatureTable make_supervised_replicate(const FeatureTable& signals, Rng& rng) {
  if (signals.rows() == 0) throw DegenerateInputError("make_supervised_replicate: empty signal table");
  const double sd = 0.1 * mean_column_sd(signals);
  FeatureTable out = signals;
  auto& x = out.values();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) += sd * rng.normal();
  }
  return out;
}

FeatureTable make_supervised_replicate(const FeatureTable& signals, std::uint64_t seed) {
  Rng rng = Rng(seed).split("replicate");
  return make_supervised_replicate(signals, rng);
}

Dataset simulate_dataset(const SimulationConfig& config) {
  config.validate();
  const Rng root(config.seed);
  Rng topo_rng = root.split("topology");
  const Tree shape = config.topology == TopologyKind::Balanced
                         ? full_binary_topology(static_cast<std::size_t>(std::countr_zero(config.n_leaves)))
                         : random_binary_topology(config.n_leaves, topo_rng());
  Rng length_rng = root.split("lengths");
  Dataset data;
  data.tree = sample_edge_lengths(shape, 1.0, config.w_max, length_rng);

  Rng signal_rng = root.split("signal");
  const FeatureTable signals = brownian_signals(data.tree, config.n_signal, signal_rng);
  const double sigma_bar = mean_column_sd(signals);
  Rng replicate_rng = root.split("replicate");
  const FeatureTable test_signals = make_supervised_replicate(signals, replicate_rng);

  const auto& leaves = data.tree.leaf_labels();
  Rng alt_rng = root.split("alt");
  const AltTreeNoise alt = alternative_tree_noise(leaves, config, sigma_bar, alt_rng);
  data.alt_trees = alt.trees;

  auto assemble = [&](const FeatureTable& sig, std::uint64_t replicate, const FeatureTable* alt_features) {
    Rng noise_rng = root.split("noise").split(replicate);
    const FeatureTable noise = gaussian_noise_features(leaves, config.n_noise, config.alpha, sigma_bar, noise_rng);
    FeatureTable fresh_alt;
    if (alt_features == nullptr) {
      Rng fresh_rng = root.split("alt-replicate").split(replicate);
      fresh_alt = config.n_altsig == 0 ? alt.features
                                       : alternative_tree_features(leaves, alt, config.n_altsig, sigma_bar, fresh_rng);
      alt_features = &fresh_alt;
    }
    return FeatureTable::hstack({&sig, &noise, alt_features});
  };
  data.train = assemble(signals, 0, &alt.features);
  data.test = assemble(test_signals, 1, nullptr);
  return data;
}

DistanceMatrix empirical_distance_matrix(const std::vector<FeatureTable>& replicates) {
  if (replicates.empty()) throw DegenerateInputError("empirical_distance_matrix: no replicates");
  const auto& first = replicates.front();
  const std::size_t n = first.rows();
  std::vector<double> sums(n * n, 0.0);
  for (const auto& r : replicates) {
    if (r.rows() != n || r.cols() != first.cols() || r.row_labels() != first.row_labels()) {
      throw InvalidArgumentError("empirical_distance_matrix: replicate shapes differ");
    }
    const auto& x = r.values();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        sums[i * n + j] += (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).squaredNorm();
      }
    }
  }
  DistanceMatrix out(first.row_labels());
  const double m = static_cast<double>(replicates.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.set(i, j, sums[i * n + j] / m);
  }
  return out;
}

}  // namespace quartree
