#include "quartree/reconstruct.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace quartree {

namespace {

// Permutation taking tree leaf index -> matrix index.
std::vector<std::size_t> align_labels(const DistanceMatrix& matrix, const Tree& tree) {
  if (matrix.size() != tree.leaf_count()) throw InvalidArgumentError("matrix and tree have different leaf counts");
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < matrix.size(); ++i) where.emplace(matrix.labels()[i], i);
  std::vector<std::size_t> out(tree.leaf_count());
  for (std::size_t i = 0; i < tree.leaf_count(); ++i) {
    const auto it = where.find(tree.leaf_labels()[i]);
    if (it == where.end()) throw InvalidArgumentError("leaf '" + tree.leaf_labels()[i] + "' missing from matrix");
    out[i] = it->second;
  }
  return out;
}

}  // namespace

NjResult neighbor_joining_detailed(const DistanceMatrix& matrix) {
  const std::size_t n = matrix.size();
  if (n < 3) throw DegenerateInputError("neighbor_joining: need at least 3 leaves");
  for (double v : matrix.values()) {
    if (!std::isfinite(v)) throw InvalidArgumentError("neighbor_joining: non-finite distance");
  }
  matrix.validate();

  // Working copy over r active slots; node[s] is the tree node in slot s.
  std::vector<double> d(matrix.values().begin(), matrix.values().end());
  const auto at = [&](std::size_t a, std::size_t b) -> double& { return d[a * n + b]; };
  std::vector<std::size_t> slots(n);
  std::iota(slots.begin(), slots.end(), 0);
  std::vector<NodeId> node(n);
  std::iota(node.begin(), node.end(), 0);
  std::vector<double> row_sum(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) row_sum[a] += at(a, b);
  }

  const std::size_t total_nodes = 2 * n - 2;
  std::vector<NodeId> parent(total_nodes, kNoNode);
  std::vector<double> raw(total_nodes, 0.0);
  NodeId next = static_cast<NodeId>(n);

  while (slots.size() > 3) {
    const std::size_t r = slots.size();
    const double scale = static_cast<double>(r - 2);
    std::size_t best_i = 0, best_j = 1;
    double best_q = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < r; ++x) {
      const std::size_t a = slots[x];
      for (std::size_t y = x + 1; y < r; ++y) {
        const std::size_t b = slots[y];
        const double q = scale * at(a, b) - row_sum[a] - row_sum[b];
        if (q < best_q) {
          best_q = q;
          best_i = x;
          best_j = y;
        }
      }
    }
    const std::size_t a = slots[best_i];
    const std::size_t b = slots[best_j];
    const double dab = at(a, b);
    const double la = dab / 2.0 + (row_sum[a] - row_sum[b]) / (2.0 * scale);
    const double lb = dab - la;
    const NodeId u = next++;
    parent[node[a]] = u;
    parent[node[b]] = u;
    raw[node[a]] = la;
    raw[node[b]] = lb;

    // The joined node reuses slot a; slot b leaves the active list.
    slots.erase(slots.begin() + static_cast<std::ptrdiff_t>(best_j));
    row_sum[a] = 0.0;
    for (std::size_t c : slots) {
      if (c == a) continue;
      const double duc = (at(a, c) + at(b, c) - dab) / 2.0;
      row_sum[c] += duc - at(a, c) - at(b, c);
      at(a, c) = duc;
      at(c, a) = duc;
      row_sum[a] += duc;
    }
    at(a, a) = 0.0;
    node[a] = u;
  }

  const std::size_t a = slots[0], b = slots[1], c = slots[2];
  const NodeId center = next++;
  raw[node[a]] = (at(a, b) + at(a, c) - at(b, c)) / 2.0;
  raw[node[b]] = (at(a, b) + at(b, c) - at(a, c)) / 2.0;
  raw[node[c]] = (at(a, c) + at(b, c) - at(a, b)) / 2.0;
  parent[node[a]] = parent[node[b]] = parent[node[c]] = center;

  NjResult result;
  std::vector<double> length(total_nodes);
  for (std::size_t v = 0; v < total_nodes; ++v) {
    length[v] = std::max(raw[v], 0.0);
    if (raw[v] < 0.0) ++result.clamped;
  }
  std::vector<std::string> label(total_nodes);
  for (std::size_t i = 0; i < n; ++i) label[i] = matrix.labels()[i];
  result.tree = Tree(std::move(parent), std::move(length), std::move(label), false);
  result.raw_lengths = std::move(raw);
  return result;
}

Tree neighbor_joining(const DistanceMatrix& matrix) { return neighbor_joining_detailed(matrix).tree; }

AttesonCertificate atteson_certified(const DistanceMatrix& matrix, const Tree& tree) {
  const auto index = align_labels(matrix, tree);
  const Tree unrooted = tree.unrooted();
  AttesonCertificate out;
  const double x_star = min_edge_length(unrooted);
  if (!(x_star > 0.0)) throw InvalidArgumentError("atteson_certified: tree has an edge of length zero");
  out.radius = x_star / 2.0;
  const DistanceMatrix exact = path_distance_matrix(unrooted);
  for (std::size_t i = 0; i < exact.size(); ++i) {
    for (std::size_t j = 0; j < exact.size(); ++j) {
      out.max_deviation = std::max(out.max_deviation, std::abs(matrix(index[i], index[j]) - exact(i, j)));
    }
  }
  out.certified = out.max_deviation < out.radius;
  return out;
}

PathMatrix path_matrix(const Tree& tree) {
  const std::size_t n = tree.leaf_count();
  PathMatrix out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.pairs.emplace_back(i, j);
  }
  for (NodeId v = 0; v < tree.node_count(); ++v) {
    if (v != tree.root()) out.edges.push_back(v);
  }
  // below[v][i]: leaf i lies under node v.
  std::vector<std::vector<char>> below(tree.node_count(), std::vector<char>(n, 0));
  const auto& order = tree.preorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId v = *it;
    if (auto leaf = tree.leaf_index(v)) below[v][*leaf] = 1;
    for (NodeId c : tree.children(v)) {
      for (std::size_t i = 0; i < n; ++i) below[v][i] |= below[c][i];
    }
  }
  out.incidence = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.pairs.size()),
                                        static_cast<Eigen::Index>(out.edges.size()));
  for (std::size_t e = 0; e < out.edges.size(); ++e) {
    const auto& side = below[out.edges[e]];
    for (std::size_t p = 0; p < out.pairs.size(); ++p) {
      if (side[out.pairs[p].first] != side[out.pairs[p].second]) {
        out.incidence(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(e)) = 1.0;
      }
    }
  }
  return out;
}

Eigen::VectorXd vectorize_pairs(const DistanceMatrix& matrix) {
  const std::size_t n = matrix.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(n * (n - 1) / 2));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out(k++) = matrix(i, j);
  }
  return out;
}

namespace {

// Projected gradient stalls long before the gradient on the support is tiny.
// Re-solve the normal equations restricted to the positive lengths, growing
// the support with any zero length whose gradient still points inward, and
// keep the result when it is feasible and no worse.
Eigen::VectorXd polish_on_support(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, const Eigen::VectorXd& start,
                                  const std::function<double(const Eigen::VectorXd&)>& objective) {
  const Eigen::Index m = start.size();
  std::vector<Eigen::Index> support;
  for (Eigen::Index k = 0; k < m; ++k)
    if (start(k) > 0.0) support.push_back(k);
  Eigen::VectorXd best = start;
  const double tol = 1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff());
  for (Eigen::Index round = 0; round <= m && !support.empty(); ++round) {
    const auto s = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd sub(s, s);
    Eigen::VectorXd sub_rhs(s);
    for (Eigen::Index a = 0; a < s; ++a) {
      sub_rhs(a) = rhs(support[a]);
      for (Eigen::Index b = 0; b < s; ++b) sub(a, b) = gram(support[a], support[b]);
    }
    const Eigen::VectorXd x = sub.ldlt().solve(sub_rhs);
    if (!x.allFinite() || x.minCoeff() <= 0.0) break;
    Eigen::VectorXd candidate = Eigen::VectorXd::Zero(m);
    for (Eigen::Index a = 0; a < s; ++a) candidate(support[a]) = x(a);
    if (objective(candidate) > objective(best) + tol) break;
    best = candidate;
    const Eigen::VectorXd grad = gram * candidate - rhs;
    Eigen::Index entering = -1;
    for (Eigen::Index k = 0; k < m; ++k)
      if (candidate(k) == 0.0 && grad(k) < -tol && (entering < 0 || grad(k) < grad(entering))) entering = k;
    if (entering < 0) break;
    support.push_back(entering);
  }
  return best;
}

}  // namespace

NnlsFit fit_edge_lengths_nnls(const Tree& topology, const DistanceMatrix& matrix, const NnlsOptions& options) {
  const Tree tree = topology.unrooted();
  const auto index = align_labels(matrix, tree);
  const PathMatrix p = path_matrix(tree);
  const std::size_t n = tree.leaf_count();
  Eigen::VectorXd target(static_cast<Eigen::Index>(p.pairs.size()));
  for (std::size_t k = 0; k < p.pairs.size(); ++k) {
    target(static_cast<Eigen::Index>(k)) = matrix(index[p.pairs[k].first], index[p.pairs[k].second]);
  }
  if (!target.allFinite()) throw InvalidArgumentError("fit_edge_lengths_nnls: non-finite distance");

  const Eigen::MatrixXd gram = p.incidence.transpose() * p.incidence;
  const Eigen::VectorXd rhs = p.incidence.transpose() * target;
  const double b_sq = target.squaredNorm();
  // 0.5 ||P E - b||^2 from the precomputed normal equations.
  const auto objective = [&](const Eigen::VectorXd& e) { return 0.5 * (e.dot(gram * e) - 2.0 * e.dot(rhs) + b_sq); };

  NnlsFit fit;
  const auto m = static_cast<Eigen::Index>(p.edges.size());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
  if (m > 0 && n >= 2) {
    const double sigma_sq = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    const double step = sigma_sq > 0.0 ? 1.0 / sigma_sq : 0.0;
    e = gram.ldlt().solve(rhs).cwiseMax(0.0);
    if (!e.allFinite()) e.setZero();
    const double gradient_floor = 1e-13 * std::max(1.0, rhs.cwiseAbs().maxCoeff());
    double f = objective(e);
    bool converged = false;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      const Eigen::VectorXd grad = gram * e - rhs;
      // Projected gradient: components that would push a zero length negative are inactive.
      double pg = 0.0;
      for (Eigen::Index k = 0; k < m; ++k) pg = std::max(pg, e(k) > 0.0 ? std::abs(grad(k)) : std::max(0.0, -grad(k)));
      if (pg <= gradient_floor) {
        converged = true;
        fit.iterations = it;
        break;
      }
      e = (e - step * grad).cwiseMax(0.0);
      const double f_next = objective(e);
      const double change = std::abs(f - f_next);
      f = f_next;
      // Objective values below the rounding level of the normal equations count as zero.
      const double scale = std::max({std::abs(f), 1e-14 * b_sq, std::numeric_limits<double>::min()});
      if (change <= options.relative_tolerance * scale) {
        converged = true;
        fit.iterations = it + 1;
        break;
      }
    }
    if (!converged) throw NnlsNotConverged(e, (p.incidence * e - target).norm());
    e = polish_on_support(gram, rhs, e, objective);
  }
  fit.gradient = gram * e - rhs;
  fit.residual = (p.incidence * e - target).norm();
  Tree fitted = tree;
  for (std::size_t k = 0; k < p.edges.size(); ++k) fitted.set_length(p.edges[k], e(static_cast<Eigen::Index>(k)));
  fit.tree = std::move(fitted);
  return fit;
}

}  // namespace quartree
