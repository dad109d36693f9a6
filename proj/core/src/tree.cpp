#include "quartree/tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "quartree/error.hpp"

namespace quartree {

// ---------------------------------------------------------------------------
// Quartet helpers

Quartet Quartet::of(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
  Quartet q{{a, b, c, d}};
  std::sort(q.leaves.begin(), q.leaves.end());
  if (q.leaves[0] == q.leaves[1] || q.leaves[1] == q.leaves[2] || q.leaves[2] == q.leaves[3]) {
    throw InvalidArgumentError("quartet: leaf indices must be distinct");
  }
  return q;
}

std::string_view to_string(QuartetTopology t) noexcept {
  switch (t) {
    case QuartetTopology::AbCd: return "AB|CD";
    case QuartetTopology::AcBd: return "AC|BD";
    case QuartetTopology::AdBc: return "AD|BC";
    case QuartetTopology::Unresolved: return "unresolved";
  }
  return "?";
}

std::array<std::array<int, 2>, 2> sibling_positions(QuartetTopology t) {
  switch (t) {
    case QuartetTopology::AbCd: return {{{0, 1}, {2, 3}}};
    case QuartetTopology::AcBd: return {{{0, 2}, {1, 3}}};
    case QuartetTopology::AdBc: return {{{0, 3}, {1, 2}}};
    case QuartetTopology::Unresolved: break;
  }
  throw InvalidArgumentError("quartet: unresolved topology has no sibling pairs");
}

namespace {

template <typename T>
QuartetTopology topology_from_sums(T ab_cd, T ac_bd, T ad_bc) {
  if (ab_cd < ac_bd && ab_cd < ad_bc) return QuartetTopology::AbCd;
  if (ac_bd < ab_cd && ac_bd < ad_bc) return QuartetTopology::AcBd;
  if (ad_bc < ab_cd && ad_bc < ac_bd) return QuartetTopology::AdBc;
  return QuartetTopology::Unresolved;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tree

Tree::Tree(std::vector<NodeId> parent, std::vector<double> length, std::vector<std::string> label,
           bool rooted)
    : parent_(std::move(parent)), length_(std::move(length)), label_(std::move(label)), rooted_(rooted) {
  if (length_.size() != parent_.size() || label_.size() != parent_.size()) {
    throw InvalidArgumentError("tree: parent/length/label vectors differ in size");
  }
  index();
}

void Tree::index() {
  const std::size_t n = parent_.size();
  if (n == 0) throw DegenerateInputError("tree: no nodes");
  children_.assign(n, {});
  root_ = kNoNode;
  for (NodeId v = 0; v < n; ++v) {
    if (parent_[v] == kNoNode) {
      if (root_ != kNoNode) throw InvalidArgumentError("tree: more than one root");
      root_ = v;
      length_[v] = 0.0;
      continue;
    }
    if (parent_[v] >= n || parent_[v] == v) {
      throw InvalidArgumentError("tree: invalid parent of node " + std::to_string(v));
    }
    if (!std::isfinite(length_[v]) || length_[v] < 0.0) {
      throw InvalidArgumentError("tree: edge lengths must be finite and non-negative");
    }
    children_[parent_[v]].push_back(v);
  }
  if (root_ == kNoNode) throw InvalidArgumentError("tree: no root");

  preorder_.clear();
  preorder_.reserve(n);
  std::vector<NodeId> stack{root_};
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    preorder_.push_back(v);
    for (auto it = children_[v].rbegin(); it != children_[v].rend(); ++it) stack.push_back(*it);
    if (preorder_.size() > n) break;
  }
  if (preorder_.size() != n) throw InvalidArgumentError("tree: graph is not connected or has a cycle");

  leaf_nodes_.clear();
  leaf_labels_.clear();
  leaf_index_of_node_.assign(n, kNoNode);
  std::unordered_set<std::string> seen;
  for (NodeId v = 0; v < n; ++v) {
    if (!children_[v].empty()) continue;
    if (label_[v].empty()) throw InvalidArgumentError("tree: unlabeled leaf (node " + std::to_string(v) + ")");
    if (!seen.insert(label_[v]).second) throw InvalidArgumentError("tree: duplicate leaf label '" + label_[v] + "'");
    leaf_index_of_node_[v] = static_cast<std::uint32_t>(leaf_nodes_.size());
    leaf_nodes_.push_back(v);
    leaf_labels_.push_back(label_[v]);
  }
}

std::optional<std::size_t> Tree::leaf_index(NodeId v) const noexcept {
  if (leaf_index_of_node_[v] == kNoNode) return std::nullopt;
  return leaf_index_of_node_[v];
}

std::optional<std::size_t> Tree::find_leaf(const std::string& label) const {
  auto it = std::find(leaf_labels_.begin(), leaf_labels_.end(), label);
  if (it == leaf_labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - leaf_labels_.begin());
}

void Tree::set_length(NodeId v, double length) {
  if (!std::isfinite(length) || length < 0.0) {
    throw InvalidArgumentError("tree: edge lengths must be finite and non-negative");
  }
  if (v != root_) length_[v] = length;
}

Tree Tree::with_unit_lengths(double length) const {
  Tree copy = *this;
  for (NodeId v = 0; v < node_count(); ++v) {
    if (v != root_) copy.length_[v] = length;
  }
  return copy;
}

Tree Tree::with_leaf_order(const std::vector<std::string>& labels) const {
  if (labels.size() != leaf_count()) throw InvalidArgumentError("tree: leaf label sets differ");
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < labels.size(); ++i) position.emplace(labels[i], i);
  for (const auto& l : leaf_labels_) {
    if (!position.contains(l)) throw InvalidArgumentError("tree: leaf label sets differ ('" + l + "')");
  }
  // Renumber so that leaves come first in the requested order, internal
  // nodes afterwards in their existing order.
  const std::size_t n = node_count();
  std::vector<NodeId> new_id(n, kNoNode);
  for (std::size_t i = 0; i < leaf_count(); ++i) new_id[leaf_nodes_[i]] = static_cast<NodeId>(position.at(leaf_labels_[i]));
  NodeId next = static_cast<NodeId>(leaf_count());
  for (NodeId v = 0; v < n; ++v) {
    if (new_id[v] == kNoNode) new_id[v] = next++;
  }
  std::vector<NodeId> parent(n);
  std::vector<double> length(n);
  std::vector<std::string> label(n);
  for (NodeId v = 0; v < n; ++v) {
    parent[new_id[v]] = parent_[v] == kNoNode ? kNoNode : new_id[parent_[v]];
    length[new_id[v]] = length_[v];
    label[new_id[v]] = label_[v];
  }
  return Tree(std::move(parent), std::move(length), std::move(label), rooted_);
}

Tree Tree::relabeled(const std::function<std::string(const std::string&)>& rename) const {
  std::vector<std::string> label = label_;
  for (NodeId v : leaf_nodes_) label[v] = rename(label_[v]);
  return Tree(parent_, length_, std::move(label), rooted_);
}

Tree Tree::unrooted() const {
  const auto& kids = children_[root_];
  if (kids.size() != 2 || (children_[kids[0]].empty() && children_[kids[1]].empty())) {
    Tree copy = *this;
    copy.rooted_ = false;
    return copy;
  }
  // The internal child becomes the new root; the other hangs from it with the
  // merged length.
  const NodeId keep = children_[kids[0]].empty() ? kids[1] : kids[0];
  const NodeId other = keep == kids[0] ? kids[1] : kids[0];
  const double merged = length_[kids[0]] + length_[kids[1]];

  const std::size_t n = node_count();
  std::vector<NodeId> new_id(n, kNoNode);
  NodeId next = 0;
  for (NodeId v = 0; v < n; ++v) {
    if (v != root_) new_id[v] = next++;
  }
  std::vector<NodeId> parent(n - 1);
  std::vector<double> length(n - 1);
  std::vector<std::string> label(n - 1);
  for (NodeId v = 0; v < n; ++v) {
    if (v == root_) continue;
    const NodeId id = new_id[v];
    label[id] = label_[v];
    if (v == keep) {
      parent[id] = kNoNode;
      length[id] = 0.0;
    } else if (v == other) {
      parent[id] = new_id[keep];
      length[id] = merged;
    } else {
      parent[id] = new_id[parent_[v]];
      length[id] = length_[v];
    }
  }
  return Tree(std::move(parent), std::move(length), std::move(label), false);
}

bool Tree::is_binary() const {
  const Tree u = unrooted();
  for (NodeId v = 0; v < u.node_count(); ++v) {
    if (u.is_leaf(v)) continue;
    if (u.degree(v) != 3) return false;
  }
  return true;
}

namespace {

// Clade (leaves below each node) for every node, over `tree`'s leaf indices.
std::vector<LeafSet> clades(const Tree& tree) {
  std::vector<LeafSet> below(tree.node_count(), LeafSet(tree.leaf_count()));
  const auto& order = tree.preorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId v = *it;
    if (auto leaf = tree.leaf_index(v)) below[v].insert(*leaf);
    for (NodeId c : tree.children(v)) below[v] |= below[c];
  }
  return below;
}

}  // namespace

bool Tree::structurally_equal(const Tree& other, double tol) const {
  if (other.leaf_count() != leaf_count() || other.node_count() != node_count()) return false;
  std::vector<std::string> mine = leaf_labels_;
  std::vector<std::string> theirs = other.leaf_labels_;
  std::sort(mine.begin(), mine.end());
  std::sort(theirs.begin(), theirs.end());
  if (mine != theirs) return false;
  const Tree aligned = other.with_leaf_order(leaf_labels_);

  auto edge_map = [](const Tree& t) {
    std::map<LeafSet, std::vector<double>> m;
    const auto below = clades(t);
    for (NodeId v = 0; v < t.node_count(); ++v) {
      if (v == t.root()) continue;
      m[below[v]].push_back(t.length(v));
    }
    for (auto& [k, v] : m) std::sort(v.begin(), v.end());
    return m;
  };
  const auto a = edge_map(*this);
  const auto b = edge_map(aligned);
  if (a.size() != b.size()) return false;
  for (const auto& [clade, lengths] : a) {
    auto it = b.find(clade);
    if (it == b.end() || it->second.size() != lengths.size()) return false;
    for (std::size_t k = 0; k < lengths.size(); ++k) {
      if (std::abs(lengths[k] - it->second[k]) > tol) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// TreeBuilder

NodeId TreeBuilder::add_root(std::string label) {
  parent_.push_back(kNoNode);
  length_.push_back(0.0);
  label_.push_back(std::move(label));
  return static_cast<NodeId>(parent_.size() - 1);
}

NodeId TreeBuilder::add_child(NodeId parent, double length, std::string label) {
  parent_.push_back(parent);
  length_.push_back(length);
  label_.push_back(std::move(label));
  return static_cast<NodeId>(parent_.size() - 1);
}

Tree TreeBuilder::build(bool rooted) && {
  return Tree(std::move(parent_), std::move(length_), std::move(label_), rooted);
}

// ---------------------------------------------------------------------------
// LeafSet / Bipartition

std::size_t LeafSet::count() const noexcept {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

LeafSet LeafSet::complement() const {
  LeafSet out(universe_);
  for (std::size_t k = 0; k < words_.size(); ++k) out.words_[k] = ~words_[k];
  if (universe_ % 64 != 0 && !out.words_.empty()) {
    out.words_.back() &= (std::uint64_t{1} << (universe_ % 64)) - 1;
  }
  return out;
}

LeafSet& LeafSet::operator|=(const LeafSet& other) noexcept {
  for (std::size_t k = 0; k < words_.size(); ++k) words_[k] |= other.words_[k];
  return *this;
}

std::vector<std::size_t> LeafSet::members() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < universe_; ++i) {
    if (contains(i)) out.push_back(i);
  }
  return out;
}

std::size_t LeafSet::hash() const noexcept {
  std::size_t h = universe_;
  for (auto w : words_) h = h * 0x9E3779B97F4A7C15ULL + (w ^ (w >> 29));
  return h;
}

Bipartition Bipartition::canonical(LeafSet side) {
  if (side.universe() > 0 && !side.contains(0)) side = side.complement();
  return Bipartition{std::move(side)};
}

std::size_t Bipartition::smaller_side() const noexcept {
  const std::size_t a = side_a.count();
  return std::min(a, side_a.universe() - a);
}

// ---------------------------------------------------------------------------
// Metrics on a single tree

namespace {

// Adjacency list over the undirected tree graph.
std::vector<std::vector<std::pair<NodeId, double>>> adjacency(const Tree& tree,
                                                              const std::vector<double>& weight) {
  std::vector<std::vector<std::pair<NodeId, double>>> adj(tree.node_count());
  for (NodeId v = 0; v < tree.node_count(); ++v) {
    if (v == tree.root()) continue;
    adj[v].emplace_back(tree.parent(v), weight[v]);
    adj[tree.parent(v)].emplace_back(v, weight[v]);
  }
  return adj;
}

template <typename T, typename Weight>
void distances_from(const std::vector<std::vector<std::pair<NodeId, Weight>>>& adj, NodeId source,
                    std::vector<T>& dist, std::vector<NodeId>& stack) {
  constexpr NodeId kUnseen = kNoNode;
  std::vector<NodeId> from(adj.size(), kUnseen);
  stack.clear();
  stack.push_back(source);
  dist[source] = T{};
  from[source] = source;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    for (const auto& [w, len] : adj[v]) {
      if (from[w] != kUnseen) continue;
      from[w] = v;
      dist[w] = dist[v] + static_cast<T>(len);
      stack.push_back(w);
    }
  }
}

}  // namespace

DistanceMatrix path_distance_matrix(const Tree& tree) {
  const std::size_t n = tree.leaf_count();
  if (n < 2) throw DegenerateInputError("path distance matrix needs at least 2 leaves");
  DistanceMatrix out(tree.leaf_labels());
  const auto adj = adjacency(tree, tree.lengths());
  std::vector<double> dist(tree.node_count());
  std::vector<NodeId> stack;
  for (std::size_t i = 0; i < n; ++i) {
    distances_from(adj, tree.leaf_node(i), dist, stack);
    for (std::size_t j = i + 1; j < n; ++j) out.set(i, j, dist[tree.leaf_node(j)]);
  }
  return out;
}

double min_edge_length(const Tree& tree) {
  if (tree.edge_count() == 0) throw DegenerateInputError("min edge length of an edgeless tree");
  double best = std::numeric_limits<double>::infinity();
  for (NodeId v = 0; v < tree.node_count(); ++v) {
    if (v != tree.root()) best = std::min(best, tree.length(v));
  }
  return best;
}

FourPointResult check_four_point(const DistanceMatrix& m, double tol) {
  FourPointResult result;
  const std::size_t n = m.size();
  for (std::uint32_t a = 0; a < n; ++a) {
    for (std::uint32_t b = a + 1; b < n; ++b) {
      for (std::uint32_t c = b + 1; c < n; ++c) {
        for (std::uint32_t d = c + 1; d < n; ++d) {
          std::array<double, 3> s{m(a, b) + m(c, d), m(a, c) + m(b, d), m(a, d) + m(b, c)};
          std::sort(s.begin(), s.end());
          const double gap = s[2] - s[1];
          if (!result.worst || gap > result.max_violation) {
            result.max_violation = gap;
            result.worst = Quartet{{a, b, c, d}};
          }
        }
      }
    }
  }
  result.additive = result.max_violation <= tol;
  return result;
}

namespace {

// Depth counted in edges of positive length.
std::vector<std::uint32_t> contracted_depths(const Tree& tree) {
  std::vector<std::uint32_t> depth(tree.node_count(), 0);
  for (NodeId v : tree.preorder()) {
    if (v == tree.root()) continue;
    depth[v] = depth[tree.parent(v)] + (tree.length(v) > 0.0 ? 1U : 0U);
  }
  return depth;
}

std::vector<std::uint32_t> node_depths(const Tree& tree) {
  std::vector<std::uint32_t> depth(tree.node_count(), 0);
  for (NodeId v : tree.preorder()) {
    if (v != tree.root()) depth[v] = depth[tree.parent(v)] + 1;
  }
  return depth;
}

}  // namespace

QuartetTopology induced_quartet_topology(const Tree& tree, const Quartet& q) {
  const std::size_t n = tree.leaf_count();
  for (std::size_t k = 0; k < 4; ++k) {
    if (q[k] >= n) throw InvalidArgumentError("quartet: leaf index out of range");
    if (k > 0 && q[k] <= q[k - 1]) throw InvalidArgumentError("quartet: indices must be distinct and sorted");
  }
  const auto hop = contracted_depths(tree);
  const auto depth = node_depths(tree);
  auto distance = [&](std::size_t i, std::size_t j) {
    NodeId u = tree.leaf_node(i);
    NodeId v = tree.leaf_node(j);
    const std::uint32_t hu = hop[u];
    const std::uint32_t hv = hop[v];
    while (depth[u] > depth[v]) u = tree.parent(u);
    while (depth[v] > depth[u]) v = tree.parent(v);
    while (u != v) {
      u = tree.parent(u);
      v = tree.parent(v);
    }
    return hu + hv - 2 * hop[u];
  };
  return topology_from_sums(distance(q[0], q[1]) + distance(q[2], q[3]),
                            distance(q[0], q[2]) + distance(q[1], q[3]),
                            distance(q[0], q[3]) + distance(q[1], q[2]));
}

QuartetTopologyIndex::QuartetTopologyIndex(const Tree& tree) : n_(tree.leaf_count()), hops_(n_ * n_, 0) {
  std::vector<double> weight(tree.node_count());
  for (NodeId v = 0; v < tree.node_count(); ++v) weight[v] = tree.length(v) > 0.0 ? 1.0 : 0.0;
  std::vector<std::vector<std::pair<NodeId, std::uint32_t>>> adj(tree.node_count());
  for (NodeId v = 0; v < tree.node_count(); ++v) {
    if (v == tree.root()) continue;
    const auto w = static_cast<std::uint32_t>(weight[v]);
    adj[v].emplace_back(tree.parent(v), w);
    adj[tree.parent(v)].emplace_back(v, w);
  }
  std::vector<std::uint32_t> dist(tree.node_count());
  std::vector<NodeId> stack;
  for (std::size_t i = 0; i < n_; ++i) {
    distances_from(adj, tree.leaf_node(i), dist, stack);
    for (std::size_t j = 0; j < n_; ++j) hops_[i * n_ + j] = dist[tree.leaf_node(j)];
  }
}

QuartetTopology QuartetTopologyIndex::operator()(const Quartet& q) const noexcept {
  auto d = [&](std::size_t i, std::size_t j) { return hops_[i * n_ + j]; };
  return topology_from_sums(d(q[0], q[1]) + d(q[2], q[3]), d(q[0], q[2]) + d(q[1], q[3]),
                            d(q[0], q[3]) + d(q[1], q[2]));
}

std::vector<Bipartition> bipartitions(const Tree& tree) {
  const Tree u = tree.unrooted();
  const std::size_t n = u.leaf_count();
  const auto below = clades(u);
  std::unordered_set<Bipartition, BipartitionHash> seen;
  std::vector<Bipartition> out;
  for (NodeId v = 0; v < u.node_count(); ++v) {
    if (v == u.root() || u.is_leaf(v)) continue;
    const std::size_t size = below[v].count();
    if (size < 2 || n - size < 2) continue;
    auto b = Bipartition::canonical(below[v]);
    if (seen.insert(b).second) out.push_back(std::move(b));
  }
  std::sort(out.begin(), out.end());
  return out;
}

double colless_index(const Tree& tree) {
  const std::size_t n = tree.leaf_count();
  std::vector<std::size_t> leaves_below(tree.node_count(), 0);
  const auto& order = tree.preorder();
  double total = 0.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId v = *it;
    const auto& kids = tree.children(v);
    if (kids.empty()) {
      leaves_below[v] = 1;
      continue;
    }
    if (kids.size() != 2) throw InvalidArgumentError("colless index requires a binary rooted tree");
    leaves_below[v] = leaves_below[kids[0]] + leaves_below[kids[1]];
    total += std::abs(static_cast<double>(leaves_below[kids[0]]) - static_cast<double>(leaves_below[kids[1]]));
  }
  if (n < 3) return 0.0;
  return total / (static_cast<double>(n - 1) * static_cast<double>(n - 2) / 2.0);
}

TreeStats tree_stats(const Tree& tree, bool unit_lengths) {
  TreeStats s;
  try {
    s.colless = colless_index(tree);
  } catch (const InvalidArgumentError&) {
    s.colless.reset();
  }

  const Tree rooted = unit_lengths ? tree.with_unit_lengths() : tree;
  std::vector<double> depth(rooted.node_count(), 0.0);
  for (NodeId v : rooted.preorder()) {
    if (v != rooted.root()) depth[v] = depth[rooted.parent(v)] + rooted.length(v);
  }
  const std::size_t n = rooted.leaf_count();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += depth[rooted.leaf_node(i)];
  s.depth_mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = depth[rooted.leaf_node(i)] - s.depth_mean;
    ss += d * d;
  }
  s.depth_sd = std::sqrt(ss / static_cast<double>(n));

  const Tree view = unit_lengths ? tree.unrooted().with_unit_lengths() : tree.unrooted();
  for (NodeId v = 0; v < view.node_count(); ++v) {
    if (v != view.root()) s.faiths_pd += view.length(v);
  }
  if (n >= 2) {
    const DistanceMatrix d = path_distance_matrix(view);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        s.diameter = std::max(s.diameter, d(i, j));
        total += d(i, j);
      }
    }
    s.mean_pairwise_distance = total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
  }
  return s;
}

}  // namespace quartree
