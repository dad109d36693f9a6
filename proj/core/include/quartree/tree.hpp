#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "quartree/distance_matrix.hpp"
#include "quartree/quartet.hpp"

namespace quartree {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

/// Edge-weighted tree over uniquely labeled leaves.
///
/// Nodes are positional; only leaf labels carry meaning. Every tree is stored
/// hanging from a root node. For an unrooted tree (`rooted() == false`) the
/// root is an arbitrary internal node and carries no meaning; for a rooted
/// tree with a degree-2 root, `unrooted()` merges the two root edges.
///
/// Leaves are indexed 0..leaf_count()-1 in increasing node-id order. The edge
/// above node `v` is identified with `v`.
class Tree {
 public:
  Tree() = default;
  /// `parent[root] == kNoNode`; `length[v]` is the edge above v (ignored at the
  /// root); `label[v]` must be non-empty and unique for leaves.
  Tree(std::vector<NodeId> parent, std::vector<double> length, std::vector<std::string> label,
       bool rooted);

  std::size_t node_count() const noexcept { return parent_.size(); }
  std::size_t edge_count() const noexcept { return parent_.empty() ? 0 : parent_.size() - 1; }
  std::size_t leaf_count() const noexcept { return leaf_nodes_.size(); }
  NodeId root() const noexcept { return root_; }
  bool rooted() const noexcept { return rooted_; }

  NodeId parent(NodeId v) const noexcept { return parent_[v]; }
  double length(NodeId v) const noexcept { return length_[v]; }
  const std::vector<NodeId>& children(NodeId v) const noexcept { return children_[v]; }
  bool is_leaf(NodeId v) const noexcept { return children_[v].empty(); }
  std::size_t degree(NodeId v) const noexcept {
    return children_[v].size() + (parent_[v] == kNoNode ? 0 : 1);
  }

  NodeId leaf_node(std::size_t leaf) const noexcept { return leaf_nodes_[leaf]; }
  /// Leaf index of node `v`, or nullopt for internal nodes.
  std::optional<std::size_t> leaf_index(NodeId v) const noexcept;
  const std::vector<std::string>& leaf_labels() const noexcept { return leaf_labels_; }
  std::optional<std::size_t> find_leaf(const std::string& label) const;
  const std::string& node_label(NodeId v) const noexcept { return label_[v]; }

  /// Nodes with parents before children.
  const std::vector<NodeId>& preorder() const noexcept { return preorder_; }

  void set_length(NodeId v, double length);
  /// Same topology and leaf order with every edge length replaced.
  Tree with_unit_lengths(double length = 1.0) const;

  /// Copy whose leaf indices follow `labels`; throws if the label sets differ.
  Tree with_leaf_order(const std::vector<std::string>& labels) const;
  /// Copy with leaf labels renamed through `rename` (old label -> new label).
  Tree relabeled(const std::function<std::string(const std::string&)>& rename) const;

  /// Unrooted view: a degree-2 root is suppressed and its two edges merged.
  Tree unrooted() const;

  /// Every internal node of the unrooted view has degree 3.
  bool is_binary() const;

  /// Structural equality: same leaf label set, same rooted splits with
  /// matching edge lengths within `tol`. Node numbering is ignored.
  bool structurally_equal(const Tree& other, double tol = 1e-9) const;

  std::vector<double> lengths() const { return length_; }

 private:
  void index();

  std::vector<NodeId> parent_;
  std::vector<double> length_;
  std::vector<std::string> label_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<NodeId> leaf_nodes_;
  std::vector<std::string> leaf_labels_;
  std::vector<NodeId> preorder_;
  std::vector<std::uint32_t> leaf_index_of_node_;
  NodeId root_ = kNoNode;
  bool rooted_ = true;
};

/// Incrementally assembles a Tree.
class TreeBuilder {
 public:
  NodeId add_root(std::string label = {});
  NodeId add_child(NodeId parent, double length, std::string label = {});
  std::size_t size() const noexcept { return parent_.size(); }
  Tree build(bool rooted) &&;

 private:
  std::vector<NodeId> parent_;
  std::vector<double> length_;
  std::vector<std::string> label_;
};

/// Fixed-width set of leaf indices.
class LeafSet {
 public:
  LeafSet() = default;
  explicit LeafSet(std::size_t universe) : universe_(universe), words_((universe + 63) / 64, 0) {}

  void insert(std::size_t i) noexcept { words_[i >> 6] |= (std::uint64_t{1} << (i & 63)); }
  bool contains(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }
  std::size_t count() const noexcept;
  std::size_t universe() const noexcept { return universe_; }
  LeafSet complement() const;
  LeafSet& operator|=(const LeafSet& other) noexcept;
  std::vector<std::size_t> members() const;

  bool operator==(const LeafSet&) const = default;
  auto operator<=>(const LeafSet&) const = default;
  std::size_t hash() const noexcept;

 private:
  std::size_t universe_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Split of the leaf set induced by one edge; `side_a` always contains leaf 0.
struct Bipartition {
  LeafSet side_a;

  static Bipartition canonical(LeafSet side);
  LeafSet side_b() const { return side_a.complement(); }
  std::size_t smaller_side() const noexcept;
  bool operator==(const Bipartition&) const = default;
  auto operator<=>(const Bipartition&) const = default;
};

struct BipartitionHash {
  std::size_t operator()(const Bipartition& b) const noexcept { return b.side_a.hash(); }
};

/// Entry (i, j) = sum of edge lengths on the unique path between leaves i and j.
DistanceMatrix path_distance_matrix(const Tree& tree);

/// Smallest edge length over all edges.
double min_edge_length(const Tree& tree);

struct FourPointResult {
  bool additive = true;
  /// Max over quartets of |largest - second largest| of the three pairing sums.
  double max_violation = 0.0;
  std::optional<Quartet> worst;
};

FourPointResult check_four_point(const DistanceMatrix& matrix, double tol);

/// Topology of `quartet` in `tree`: the pairing with the smallest within-pair
/// path sum. Ties between the two smallest sums give Unresolved.
QuartetTopology induced_quartet_topology(const Tree& tree, const Quartet& quartet);

/// Precomputed induced topologies for repeated quartet queries.
///
/// Uses edge-count distances where edges of zero length are contracted, so
/// two pairings tie exactly when the internal path separating them has zero
/// total length. Agrees with induced_quartet_topology on every quartet.
class QuartetTopologyIndex {
 public:
  explicit QuartetTopologyIndex(const Tree& tree);
  QuartetTopology operator()(const Quartet& q) const noexcept;
  std::size_t leaf_count() const noexcept { return n_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::uint32_t> hops_;
};

/// Nontrivial bipartitions of the unrooted view, one per internal edge.
std::vector<Bipartition> bipartitions(const Tree& tree);

struct TreeStats {
  /// Absent unless the rooted tree is binary.
  std::optional<double> colless;
  double diameter = 0.0;
  double depth_mean = 0.0;
  double depth_sd = 0.0;
  double faiths_pd = 0.0;
  double mean_pairwise_distance = 0.0;
};

/// Shape statistics. Colless and leaf depths use the rooted tree; diameter,
/// Faith's PD and mean pairwise distance use the unrooted view. With
/// `unit_lengths` every edge of the respective view counts as 1.
TreeStats tree_stats(const Tree& tree, bool unit_lengths);

/// Normalized Colless index: sum over internal nodes of |left - right| leaf
/// counts divided by (n-1)(n-2)/2. Throws InvalidArgumentError when the rooted
/// tree is not binary.
double colless_index(const Tree& tree);

}  // namespace quartree
