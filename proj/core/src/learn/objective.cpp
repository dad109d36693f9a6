#include "quartree/learn/objective.hpp"

#include <cmath>

namespace quartree {

ObjectiveResult total_objective(const EmbeddingModel& model, const Eigen::MatrixXd& features,
                                std::span<const BatchQuartet> batch, const LossConfig& config,
                                const ForwardOptions& options, const Eigen::MatrixXd* reference) {
  if (batch.empty()) throw SupervisionStarvationError("objective: empty quartet batch");
  ForwardCache cache;
  ObjectiveResult out;
  out.embedding = model.forward(features, options, &cache);
  out.gates = cache.gate;
  out.gradients = model.params().zeros_like();
  const Eigen::MatrixXd& z = out.embedding;
  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(z.rows(), z.cols());

  const double per_quartet = config.lambda_add / static_cast<double>(batch.size());
  const QuartetWeights supervised{config.w_close, config.w_push, config.m0};
  const QuartetWeights unsupervised{config.w_close, 0.0, config.m0};
  const auto reference_distance = [&](std::uint32_t i, std::uint32_t j) {
    return reference ? (*reference)(i, j) : embedding_distance(z, i, j, config.metric);
  };
  double additivity = 0.0;
  for (const auto& item : batch) {
    switch (config.kind) {
      case LossKind::Quartet: {
        const auto& w = item.topology ? supervised : unsupervised;
        additivity += quartet_loss(z, item.quartet, item.topology, w, config.metric, &dz, per_quartet).total();
        break;
      }
      case LossKind::Triplet:
        additivity += triplet_loss(z, triplet_roles(item.quartet, item.topology, reference_distance), config.m0, &dz,
                                   per_quartet);
        break;
      case LossKind::Quadruplet:
        additivity += quadruplet_loss(z, triplet_roles(item.quartet, item.topology, reference_distance),
                                      config.quadruplet_alpha(), config.quadruplet_beta(), &dz, per_quartet);
        break;
    }
  }
  out.terms.additivity = per_quartet * additivity;

  const auto& params = model.params();
  const bool projected = model.config().projection;
  if (config.lambda > 0.0) {
    if (projected) {
      const Eigen::MatrixXd y = features * params.projection.transpose();
      Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(y.rows(), y.cols());
      out.terms.deviation = config.lambda * deviation_loss(y, z, config.metric, &dz, &dy, config.lambda);
      out.gradients.projection.noalias() += dy.transpose() * features;
    } else {
      out.terms.deviation = config.lambda * deviation_loss(features, z, config.metric, &dz, nullptr, config.lambda);
    }
  }
  if (projected && config.projection_l1 > 0.0) {
    const Eigen::MatrixXd off = params.projection - Eigen::MatrixXd::Identity(params.projection.rows(), params.projection.cols());
    out.terms.projection = config.projection_l1 * off.cwiseAbs().sum();
    out.gradients.projection += config.projection_l1 * off.unaryExpr([](double v) { return double((v > 0) - (v < 0)); });
  }

  Eigen::VectorXd d_gate;
  if (model.config().gating) {
    out.terms.sparsity = sparsity_penalty(cache.gate, config.lambda_spar);
    d_gate = Eigen::VectorXd::Constant(cache.gate.size(), config.lambda_spar / static_cast<double>(cache.gate.size()));
  }
  model.backward(cache, dz, out.gradients, d_gate.size() > 0 ? &d_gate : nullptr);
  return out;
}

}  // namespace quartree
