#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "quartree/rng.hpp"

namespace quartree {

struct ModelConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden{256, 256};
  std::size_t output_dim = 128;
  bool gating = true;
  double gate_temperature = 1.0;
  /// Initial on-logit minus off-logit of every gate.
  double gate_init = 2.0;
  /// Learnable d x d matrix G, used by the deviation term of the
  /// unsupervised objective.
  bool projection = false;
  double data_dropout = 0.0;
  double metric_dropout = 0.0;

  /// Throws InvalidArgumentError on inconsistent fields.
  void validate() const;
};

/// All trainable tensors. Gradients use the same layout.
struct Parameters {
  /// Layer l maps width in_l to out_l: weights[l] is out_l x in_l.
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  /// d x 2; column 0 holds the "on" logit and column 1 the "off" logit.
  Eigen::MatrixXd gate_logits;
  /// d x d, or empty without a projection.
  Eigen::MatrixXd projection;

  Parameters zeros_like() const;
  std::size_t size() const noexcept;
  Eigen::VectorXd flatten() const;
  /// Inverse of flatten; `values.size()` must equal size().
  void assign(const Eigen::VectorXd& values);
};

enum class GateMode : std::uint8_t {
  /// One-hot Gumbel-softmax sample; gradients pass through the soft value.
  Hard,
  /// The relaxed Gumbel-softmax probability itself.
  Soft,
  /// No noise: on iff the on-logit exceeds the off-logit. Used for evaluation.
  Deterministic,
};

struct GateSample {
  /// Gate values applied to the features.
  Eigen::VectorXd value;
  /// Temperature-softmax probability of "on" under the sampled noise.
  Eigen::VectorXd soft;
};

/// Per feature: perturb the (on, off) logits with independent Gumbel(0,1)
/// noise and take the temperature-tau softmax. `gumbel` (d x 2) overrides
/// the random draws when non-null.
GateSample gate_sample(const Eigen::MatrixXd& logits, double tau, GateMode mode, Rng& rng,
                       const Eigen::MatrixXd* gumbel = nullptr);

struct ForwardOptions {
  bool train = false;
  GateMode gate_mode = GateMode::Deterministic;
  /// Seeds the gate noise and dropout masks of this call.
  std::uint64_t seed = 0;
  /// Fixed gate noise (d x 2); overrides seeded draws.
  const Eigen::MatrixXd* gumbel = nullptr;
};

struct ForwardCache {
  Eigen::MatrixXd features;
  Eigen::VectorXd gate;
  Eigen::VectorXd gate_soft;
  GateMode gate_mode = GateMode::Deterministic;
  /// Inverted-dropout multipliers; empty when dropout was not applied.
  Eigen::MatrixXd data_mask;
  Eigen::MatrixXd metric_mask;
  /// Input of each linear layer.
  std::vector<Eigen::MatrixXd> layer_inputs;
  /// Pre-activation of each hidden layer.
  std::vector<Eigen::MatrixXd> pre_activations;
};

/// Feed-forward rectifier embedder with per-feature gates:
/// z = f(g * x), one row per leaf.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  /// Weights ~ Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0, G = I.
  EmbeddingModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  const Parameters& params() const noexcept { return params_; }
  Parameters& params() noexcept { return params_; }

  /// `x` is n x input_dim. Dropout only applies with options.train.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const ForwardOptions& options, ForwardCache* cache = nullptr) const;

  /// Accumulates into `grads` the parameter gradients for upstream gradient
  /// `d_output` (n x output_dim), plus `d_gate` (per-feature) when non-null.
  void backward(const ForwardCache& cache, const Eigen::MatrixXd& d_output, Parameters& grads,
                const Eigen::VectorXd* d_gate = nullptr) const;

  /// Deterministic gate states (all true when gating is disabled).
  std::vector<bool> active_gates() const;

  nlohmann::json to_json() const;
  static EmbeddingModel from_json(const nlohmann::json& j);

 private:
  ModelConfig config_;
  Parameters params_;
};

}  // namespace quartree
