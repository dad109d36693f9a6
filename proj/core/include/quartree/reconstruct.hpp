#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "quartree/distance_matrix.hpp"
#include "quartree/error.hpp"
#include "quartree/tree.hpp"

namespace quartree {

struct NjResult {
  Tree tree;
  /// Branch lengths before clamping, indexed by node id of `tree`.
  std::vector<double> raw_lengths;
  std::size_t clamped = 0;
};

/// Neighbor-Joining. Returns an unrooted binary tree over the matrix labels
/// (leaf i of the result is label i of the matrix); the root node is the
/// center of the final three-way join and has degree 3.
///
/// Each step joins the pair minimizing Q(i,j) = (r-2) d(i,j) - R_i - R_j over
/// the r active nodes, ties going to the smallest (i, j) in the working
/// order. Negative branch lengths are clamped to 0.
NjResult neighbor_joining_detailed(const DistanceMatrix& matrix);
Tree neighbor_joining(const DistanceMatrix& matrix);

struct AttesonCertificate {
  bool certified = false;
  double max_deviation = 0.0;
  double radius = 0.0;
};

/// Certified iff || matrix - D_tree ||_inf < min_edge_length / 2, with the
/// edge lengths of the tree's unrooted view. Throws InvalidArgumentError on a
/// label mismatch or an edge of length zero.
AttesonCertificate atteson_certified(const DistanceMatrix& matrix, const Tree& tree);

/// Leaf-pair by edge incidence matrix. Rows are pairs (i < j) in
/// lexicographic order; columns are the edges of `tree` (non-root nodes in
/// increasing id order).
struct PathMatrix {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<NodeId> edges;
  Eigen::MatrixXd incidence;
};

PathMatrix path_matrix(const Tree& tree);

/// Pair-vectorized distances in PathMatrix row order.
Eigen::VectorXd vectorize_pairs(const DistanceMatrix& matrix);

struct NnlsFit {
  /// Unrooted view of the topology with fitted lengths.
  Tree tree;
  /// || P E - M ||_2
  double residual = 0.0;
  std::size_t iterations = 0;
  /// Gradient of 0.5 || P E - M ||^2 at the solution, one entry per edge.
  Eigen::VectorXd gradient;
};

class NnlsNotConverged : public NumericalError {
 public:
  NnlsNotConverged(Eigen::VectorXd last_iterate, double residual)
      : NumericalError("NNLS edge fitting did not converge (residual " + std::to_string(residual) + ")"),
        last_iterate_(std::move(last_iterate)),
        residual_(residual) {}

  const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }
  double residual() const noexcept { return residual_; }

 private:
  Eigen::VectorXd last_iterate_;
  double residual_;
};

struct NnlsOptions {
  double relative_tolerance = 1e-10;
  std::size_t max_iterations = 100000;
};

/// Edge lengths minimizing || P E - M ||_2 subject to E >= 0 by projected
/// gradient descent with step 1 / sigma_max(P)^2, fitted on the unrooted view
/// of `topology`. Iteration starts from the clipped unconstrained
/// least-squares solution and stops when the relative objective change falls
/// below the tolerance or the projected gradient vanishes. Throws
/// NnlsNotConverged after max_iterations.
NnlsFit fit_edge_lengths_nnls(const Tree& topology, const DistanceMatrix& matrix, const NnlsOptions& options = {});

}  // namespace quartree
