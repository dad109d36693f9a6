#pragma once

#include <optional>
#include <string>
#include <vector>

#include "quartree/feature_table.hpp"
#include "quartree/learn/objective.hpp"
#include "quartree/metrics.hpp"
#include "quartree/quartets.hpp"
#include "quartree/tree.hpp"

namespace quartree {

enum class SupervisionKind : std::uint8_t { Supervised, Partition, Partial, Unsupervised };

std::optional<SupervisionKind> parse_supervision_kind(std::string_view text) noexcept;
std::string_view to_string(SupervisionKind kind) noexcept;

/// Which quartets may be trained on and where their topologies come from.
/// Leaf indices refer to rows of the training table.
struct Supervision {
  SupervisionKind kind = SupervisionKind::Unsupervised;
  std::optional<Tree> tree;
  std::optional<PartitionPrior> partition;
  std::optional<LabelPrior> labels;

  static Supervision supervised(Tree tree);
  static Supervision partition_prior(PartitionPrior prior);
  static Supervision partial(LabelPrior labels, Tree tree);
  static Supervision unsupervised();
};

enum class OptimizerKind : std::uint8_t { Sgd, Adam };

std::optional<OptimizerKind> parse_optimizer_kind(std::string_view text) noexcept;
std::string_view to_string(OptimizerKind kind) noexcept;

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  std::size_t steps = 1000;
  double learning_rate = 1e-3;
  /// SGD momentum, or Adam's first-moment decay.
  double momentum = 0.9;
  /// Adam second-moment decay.
  double beta2 = 0.999;
  /// Rescales the gradient to this global L2 norm when larger; 0 disables.
  double clip_norm = 0.0;
  /// Learning-rate multiplier of the gate logits.
  double gate_lr_scale = 1.0;
};

struct TrainConfig {
  LossConfig loss;
  OptimizerConfig optimizer;
  /// 0 disables periodic evaluation; the final step is always evaluated
  /// when a reference tree is given.
  std::size_t eval_interval = 100;
  GateMode gate_mode = GateMode::Hard;
  QdMode qd;
};

struct StepRecord {
  std::size_t step = 0;
  ObjectiveTerms terms;
  std::size_t gates_on = 0;
};

struct EvalRecord {
  std::size_t step = 0;
  double train_rf = 0.0;
  double train_qd = 0.0;
  std::optional<double> test_rf;
  std::optional<double> test_qd;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
};

/// Per-step CSV (step, total, components, gates_on) and per-eval CSV.
std::string format_step_history_csv(const TrainHistory& history);
std::string format_eval_history_csv(const TrainHistory& history);

class TrainingDivergedError : public NumericalError {
 public:
  TrainingDivergedError(const std::string& what, TrainHistory history)
      : NumericalError(what), history_(std::move(history)) {}
  const TrainHistory& history() const noexcept { return history_; }

 private:
  TrainHistory history_;
};

struct TrainResult {
  EmbeddingModel model;
  TrainHistory history;
};

/// Embeds the rows of `table` with deterministic gates and builds the NJ tree
/// of the embedding distances.
Tree embed_and_reconstruct(const EmbeddingModel& model, const FeatureTable& table, DistanceKind metric);

/// Draws quartet batches i.i.d. with replacement from the set a supervision
/// mode allows, with the topology it implies. Trees are aligned to
/// `row_labels`; partition and label priors must already be indexed by row.
class QuartetSampler {
 public:
  /// Throws SupervisionStarvationError when the allowed set is empty and
  /// InvalidArgumentError when the priors do not match the rows.
  QuartetSampler(const Supervision& supervision, const std::vector<std::string>& row_labels);

  std::vector<BatchQuartet> sample(std::size_t count, Rng& rng) const;
  /// Row-aligned supervision tree, when the mode has one.
  const std::optional<Tree>& tree() const noexcept { return tree_; }

 private:
  Quartet draw_from(const std::vector<std::uint32_t>& pool, Rng& rng) const;

  SupervisionKind kind_;
  std::size_t n_ = 0;
  std::optional<Tree> tree_;
  std::optional<QuartetTopologyIndex> index_;
  std::optional<PartitionPrior> partition_;
  std::vector<std::uint32_t> pool_;
};

/// SGD with momentum on all parameters. `reference` (leaf labels matching the
/// table rows) enables evaluation of the train and test embeddings.
TrainResult train(EmbeddingModel model, const FeatureTable& train_table, const FeatureTable* test_table,
                  const Supervision& supervision, const TrainConfig& config, std::uint64_t seed,
                  const Tree* reference = nullptr);

}  // namespace quartree
