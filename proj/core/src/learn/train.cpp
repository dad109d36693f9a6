#include "quartree/learn/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "quartree/reconstruct.hpp"

namespace quartree {

std::optional<SupervisionKind> parse_supervision_kind(std::string_view text) noexcept {
  if (text == "supervised") return SupervisionKind::Supervised;
  if (text == "partition") return SupervisionKind::Partition;
  if (text == "partial") return SupervisionKind::Partial;
  if (text == "unsupervised") return SupervisionKind::Unsupervised;
  return std::nullopt;
}

std::string_view to_string(SupervisionKind kind) noexcept {
  switch (kind) {
    case SupervisionKind::Supervised: return "supervised";
    case SupervisionKind::Partition: return "partition";
    case SupervisionKind::Partial: return "partial";
    case SupervisionKind::Unsupervised: return "unsupervised";
  }
  return "?";
}

std::optional<OptimizerKind> parse_optimizer_kind(std::string_view text) noexcept {
  if (text == "sgd") return OptimizerKind::Sgd;
  if (text == "adam") return OptimizerKind::Adam;
  return std::nullopt;
}

std::string_view to_string(OptimizerKind kind) noexcept { return kind == OptimizerKind::Adam ? "adam" : "sgd"; }

Supervision Supervision::supervised(Tree tree) {
  Supervision s;
  s.kind = SupervisionKind::Supervised;
  s.tree = std::move(tree);
  return s;
}

Supervision Supervision::partition_prior(PartitionPrior prior) {
  Supervision s;
  s.kind = SupervisionKind::Partition;
  s.partition = std::move(prior);
  return s;
}

Supervision Supervision::partial(LabelPrior labels, Tree tree) {
  Supervision s;
  s.kind = SupervisionKind::Partial;
  s.labels = std::move(labels);
  s.tree = std::move(tree);
  return s;
}

Supervision Supervision::unsupervised() { return {}; }

namespace {

void append_number(std::string& out, double value) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  out.append(buffer, ptr);
}

// Resolved quartets are rare only for trees with many zero-length edges; give
// up after this many consecutive rejections.
constexpr std::size_t kMaxRejections = 100000;

}  // namespace

std::string format_step_history_csv(const TrainHistory& history) {
  std::string out = "step,total,additivity,deviation,sparsity,projection,gates_on\n";
  for (const auto& r : history.steps) {
    out += std::to_string(r.step);
    for (double v : {r.terms.total(), r.terms.additivity, r.terms.deviation, r.terms.sparsity, r.terms.projection}) {
      out += ',';
      append_number(out, v);
    }
    out += ',' + std::to_string(r.gates_on) + '\n';
  }
  return out;
}

std::string format_eval_history_csv(const TrainHistory& history) {
  std::string out = "step,train_rf,train_qd,test_rf,test_qd\n";
  for (const auto& r : history.evals) {
    out += std::to_string(r.step);
    for (const std::optional<double>& v : {std::optional<double>(r.train_rf), std::optional<double>(r.train_qd),
                                           r.test_rf, r.test_qd}) {
      out += ',';
      if (v) append_number(out, *v);
    }
    out += '\n';
  }
  return out;
}

QuartetSampler::QuartetSampler(const Supervision& supervision, const std::vector<std::string>& row_labels)
    : kind_(supervision.kind), n_(row_labels.size()) {
  if (n_ < 4) throw SupervisionStarvationError("training needs at least 4 leaves");
  const bool needs_tree = kind_ == SupervisionKind::Supervised || kind_ == SupervisionKind::Partial;
  if (needs_tree) {
    if (!supervision.tree) throw InvalidArgumentError(std::string(to_string(kind_)) + " supervision needs a tree");
    tree_ = supervision.tree->with_leaf_order(row_labels);
    index_.emplace(*tree_);
  }
  pool_.resize(n_);
  std::iota(pool_.begin(), pool_.end(), 0U);
  if (kind_ == SupervisionKind::Partition) {
    if (!supervision.partition) throw InvalidArgumentError("partition supervision needs a clade prior");
    if (supervision.partition->leaf_count() != n_) throw InvalidArgumentError("clade prior does not match the table rows");
    partition_ = supervision.partition;
    if (exact_known_counts(partition_->clade_sizes()).known() == 0) {
      throw SupervisionStarvationError("clade prior resolves no quartet");
    }
  }
  if (kind_ == SupervisionKind::Partial) {
    if (!supervision.labels) throw InvalidArgumentError("partial supervision needs a label prior");
    if (supervision.labels->leaf_count() != n_) throw InvalidArgumentError("label prior does not match the table rows");
    pool_.clear();
    for (auto leaf : supervision.labels->labeled_leaves()) pool_.push_back(static_cast<std::uint32_t>(leaf));
    if (pool_.size() < 4) throw SupervisionStarvationError("fewer than 4 labeled leaves: no fully labeled quartet");
  }
}

Quartet QuartetSampler::draw_from(const std::vector<std::uint32_t>& pool, Rng& rng) const {
  std::array<std::uint32_t, 4> pick{};
  for (std::size_t k = 0; k < 4; ++k) {
    bool fresh = false;
    while (!fresh) {
      pick[k] = pool[static_cast<std::size_t>(rng.below(pool.size()))];
      fresh = std::find(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), pick[k]) ==
              pick.begin() + static_cast<std::ptrdiff_t>(k);
    }
  }
  return Quartet::of(pick[0], pick[1], pick[2], pick[3]);
}

std::vector<BatchQuartet> QuartetSampler::sample(std::size_t count, Rng& rng) const {
  std::vector<BatchQuartet> batch;
  batch.reserve(count);
  std::size_t rejections = 0;
  while (batch.size() < count) {
    const Quartet q = draw_from(pool_, rng);
    std::optional<QuartetTopology> topology;
    switch (kind_) {
      case SupervisionKind::Supervised:
      case SupervisionKind::Partial: topology = (*index_)(q); break;
      case SupervisionKind::Partition:
        if (classify_by_partition(q, *partition_).known) topology = resolve_from_partition(q, *partition_);
        break;
      case SupervisionKind::Unsupervised: batch.push_back({q, std::nullopt}); continue;
    }
    if (!topology || *topology == QuartetTopology::Unresolved) {
      if (++rejections > kMaxRejections) throw SupervisionStarvationError("no resolved quartet found while sampling");
      continue;
    }
    rejections = 0;
    batch.push_back({q, topology});
  }
  return batch;
}

Tree embed_and_reconstruct(const EmbeddingModel& model, const FeatureTable& table, DistanceKind metric) {
  const Eigen::MatrixXd z = model.forward(table.values(), ForwardOptions{});
  return neighbor_joining(row_distances(z, table.row_labels(), metric));
}

TrainResult train(EmbeddingModel model, const FeatureTable& train_table, const FeatureTable* test_table,
                  const Supervision& supervision, const TrainConfig& config, std::uint64_t seed, const Tree* reference) {
  config.loss.validate();
  const auto& opt = config.optimizer;
  if (!(opt.learning_rate >= 0.0) || !(opt.momentum >= 0.0 && opt.momentum < 1.0) ||
      !(opt.beta2 >= 0.0 && opt.beta2 < 1.0) || !(opt.clip_norm >= 0.0) || !(opt.gate_lr_scale >= 0.0)) {
    throw InvalidArgumentError(
        "optimizer: learning rate, clip norm and gate scale must be >= 0; momentum and beta2 in [0, 1)");
  }
  const QuartetSampler sampler(supervision, train_table.row_labels());
  const Rng root(seed);
  Rng batch_rng = root.split("batch");
  const Rng forward_stream = root.split("forward");
  const Eigen::MatrixXd& x = train_table.values();

  // Tree distances order triplet roles whenever a supervision tree exists.
  Eigen::MatrixXd tree_distances;
  if (sampler.tree() && config.loss.kind != LossKind::Quartet) {
    const auto d = path_distance_matrix(*sampler.tree());
    tree_distances = Eigen::Map<const Eigen::MatrixXd>(d.values().data(), static_cast<Eigen::Index>(d.size()),
                                                       static_cast<Eigen::Index>(d.size()));
  }
  TrainResult result{std::move(model), {}};
  auto& history = result.history;
  const auto evaluate = [&](std::size_t step) {
    EvalRecord r;
    r.step = step;
    const auto metric = config.loss.metric;
    const Tree train_tree = embed_and_reconstruct(result.model, train_table, metric);
    r.train_rf = rf_distance(*reference, train_tree);
    r.train_qd = quartet_distance(*reference, train_tree, config.qd);
    if (test_table) {
      const Tree test_tree = embed_and_reconstruct(result.model, *test_table, metric);
      r.test_rf = rf_distance(*reference, test_tree);
      r.test_qd = quartet_distance(*reference, test_tree, config.qd);
    }
    history.evals.push_back(r);
  };
  const std::size_t steps = config.optimizer.steps;
  const bool evaluating = reference != nullptr;
  if (evaluating) evaluate(0);

  Eigen::VectorXd theta = result.model.params().flatten();
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd second_moment = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd step_size;
  {
    Parameters rates = result.model.params().zeros_like();
    Eigen::VectorXd ones = Eigen::VectorXd::Constant(theta.size(), opt.learning_rate);
    rates.assign(ones);
    rates.gate_logits *= opt.gate_lr_scale;
    step_size = rates.flatten();
  }
  for (std::size_t step = 0; step < steps; ++step) {
    const auto batch = sampler.sample(config.loss.quartets_per_step, batch_rng);
    Rng step_rng = forward_stream.split(step);
    ForwardOptions options;
    options.train = true;
    options.gate_mode = config.gate_mode;
    options.seed = step_rng();
    const ObjectiveResult objective = total_objective(result.model, x, batch, config.loss, options,
                                                      tree_distances.size() > 0 ? &tree_distances : nullptr);
    StepRecord record;
    record.step = step + 1;
    record.terms = objective.terms;
    Eigen::VectorXd gradient = objective.gradients.flatten();
    if (!std::isfinite(objective.terms.total()) || !gradient.allFinite()) {
      history.steps.push_back(record);
      throw TrainingDivergedError("training diverged at step " + std::to_string(step + 1), std::move(history));
    }
    if (opt.clip_norm > 0.0) {
      const double norm = gradient.norm();
      if (norm > opt.clip_norm) gradient *= opt.clip_norm / norm;
    }
    if (opt.kind == OptimizerKind::Sgd) {
      velocity = opt.momentum * velocity + gradient;
      theta -= step_size.cwiseProduct(velocity);
    } else {
      constexpr double kEpsilon = 1e-8;
      const double t = static_cast<double>(step + 1);
      velocity = opt.momentum * velocity + (1.0 - opt.momentum) * gradient;
      second_moment = opt.beta2 * second_moment + (1.0 - opt.beta2) * gradient.cwiseAbs2();
      const double c1 = 1.0 - std::pow(opt.momentum, t);
      const double c2 = 1.0 - std::pow(opt.beta2, t);
      const Eigen::ArrayXd update =
          (velocity.array() / c1) / ((second_moment.array() / c2).sqrt() + kEpsilon);
      theta -= step_size.cwiseProduct(update.matrix());
    }
    result.model.params().assign(theta);
    const auto active = result.model.active_gates();
    record.gates_on = static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
    history.steps.push_back(record);

    const bool due = config.eval_interval > 0 && (step + 1) % config.eval_interval == 0;
    if (evaluating && (due || step + 1 == steps)) evaluate(step + 1);
  }
  return result;
}

}  // namespace quartree
