#pragma once

#include <optional>
#include <span>

#include <Eigen/Dense>

#include "quartree/error.hpp"
#include "quartree/learn/losses.hpp"
#include "quartree/learn/model.hpp"

namespace quartree {

/// Raised when the supervision mode leaves no quartet to train on.
class SupervisionStarvationError : public DegenerateInputError {
 public:
  using DegenerateInputError::DegenerateInputError;
};

struct BatchQuartet {
  Quartet quartet;
  /// Absent in unsupervised mode: the observed sums decide the ordering.
  std::optional<QuartetTopology> topology;
};

struct ObjectiveTerms {
  double additivity = 0.0;
  double deviation = 0.0;
  double sparsity = 0.0;
  double projection = 0.0;

  double total() const noexcept { return additivity + deviation + sparsity + projection; }
};

struct ObjectiveResult {
  ObjectiveTerms terms;
  Parameters gradients;
  Eigen::MatrixXd embedding;
  Eigen::VectorXd gates;
};

/// lambda_add * mean batch loss + lambda * deviation + sparsity, plus
/// projection_l1 * ||G - I||_1 when the model has a projection, in which case
/// the deviation compares D(f(X)) with D(X G^T). Unsupervised batch entries
/// use the close term only. `reference` (n x n), when given, orders the
/// triplet and quadruplet roles; otherwise embedding distances do.
ObjectiveResult total_objective(const EmbeddingModel& model, const Eigen::MatrixXd& features,
                                std::span<const BatchQuartet> batch, const LossConfig& config,
                                const ForwardOptions& options, const Eigen::MatrixXd* reference = nullptr);

}  // namespace quartree
