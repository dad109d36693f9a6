#include "quartree/learn/model.hpp"

#include <cmath>

#include "quartree/error.hpp"

namespace quartree {

void ModelConfig::validate() const {
  if (input_dim == 0) throw InvalidArgumentError("model: input_dim must be positive");
  if (output_dim == 0) throw InvalidArgumentError("model: output_dim must be positive");
  for (auto w : hidden) {
    if (w == 0) throw InvalidArgumentError("model: hidden widths must be positive");
  }
  if (!(gate_temperature > 0.0)) throw InvalidArgumentError("model: gate temperature must be positive");
  if (!(data_dropout >= 0.0 && data_dropout < 1.0) || !(metric_dropout >= 0.0 && metric_dropout < 1.0)) {
    throw InvalidArgumentError("model: dropout rates must lie in [0, 1)");
  }
}

Parameters Parameters::zeros_like() const {
  Parameters z;
  for (const auto& w : weights) z.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : biases) z.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  z.gate_logits = Eigen::MatrixXd::Zero(gate_logits.rows(), gate_logits.cols());
  z.projection = Eigen::MatrixXd::Zero(projection.rows(), projection.cols());
  return z;
}

std::size_t Parameters::size() const noexcept {
  Eigen::Index total = gate_logits.size() + projection.size();
  for (const auto& w : weights) total += w.size();
  for (const auto& b : biases) total += b.size();
  return static_cast<std::size_t>(total);
}

Eigen::VectorXd Parameters::flatten() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
  Eigen::Index at = 0;
  const auto put = [&](const auto& block) {
    out.segment(at, block.size()) = block.reshaped();
    at += block.size();
  };
  for (std::size_t l = 0; l < weights.size(); ++l) {
    put(weights[l]);
    put(biases[l]);
  }
  put(gate_logits);
  put(projection);
  return out;
}

void Parameters::assign(const Eigen::VectorXd& values) {
  if (static_cast<std::size_t>(values.size()) != size()) throw InvalidArgumentError("parameter vector has the wrong size");
  Eigen::Index at = 0;
  const auto take = [&](auto& block) {
    block.reshaped() = values.segment(at, block.size());
    at += block.size();
  };
  for (std::size_t l = 0; l < weights.size(); ++l) {
    take(weights[l]);
    take(biases[l]);
  }
  take(gate_logits);
  take(projection);
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

GateSample gate_sample(const Eigen::MatrixXd& logits, double tau, GateMode mode, Rng& rng, const Eigen::MatrixXd* gumbel) {
  if (!(tau > 0.0)) throw InvalidArgumentError("gate_sample: temperature must be positive");
  const Eigen::Index d = logits.rows();
  GateSample out{Eigen::VectorXd(d), Eigen::VectorXd(d)};
  for (Eigen::Index j = 0; j < d; ++j) {
    double on = logits(j, 0);
    double off = logits(j, 1);
    if (mode != GateMode::Deterministic) {
      on += gumbel ? (*gumbel)(j, 0) : rng.gumbel();
      off += gumbel ? (*gumbel)(j, 1) : rng.gumbel();
    }
    // Two-way softmax at temperature tau is a sigmoid of the logit gap.
    out.soft(j) = sigmoid((on - off) / tau);
    out.value(j) = mode == GateMode::Soft ? out.soft(j) : (on > off ? 1.0 : 0.0);
  }
  return out;
}

EmbeddingModel::EmbeddingModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng = Rng(seed).split("init");
  std::size_t in = config_.input_dim;
  std::vector<std::size_t> widths = config_.hidden;
  widths.push_back(config_.output_dim);
  for (std::size_t out : widths) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Eigen::MatrixXd w(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = rng.uniform(-bound, bound);
    params_.weights.push_back(std::move(w));
    params_.biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out)));
    in = out;
  }
  const auto d = static_cast<Eigen::Index>(config_.input_dim);
  params_.gate_logits = Eigen::MatrixXd::Zero(config_.gating ? d : 0, 2);
  if (config_.gating) params_.gate_logits.col(0).setConstant(config_.gate_init);
  params_.projection = config_.projection ? Eigen::MatrixXd::Identity(d, d) : Eigen::MatrixXd(0, 0);
}

Eigen::MatrixXd EmbeddingModel::forward(const Eigen::MatrixXd& x, const ForwardOptions& options, ForwardCache* cache) const {
  if (static_cast<std::size_t>(x.cols()) != config_.input_dim) {
    throw InvalidArgumentError("forward: feature width " + std::to_string(x.cols()) + " does not match model input " +
                               std::to_string(config_.input_dim));
  }
  const Rng stream(options.seed);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();

  GateSample gates{Eigen::VectorXd::Ones(d), Eigen::VectorXd::Ones(d)};
  if (config_.gating) {
    Rng gate_rng = stream.split("gate");
    gates = gate_sample(params_.gate_logits, config_.gate_temperature, options.gate_mode, gate_rng, options.gumbel);
  }
  Eigen::MatrixXd a = x * gates.value.asDiagonal();

  const auto dropout_mask = [&](Eigen::Index rows, Eigen::Index cols, double rate, std::string_view name) {
    Rng mask_rng = stream.split(name);
    Eigen::MatrixXd mask(rows, cols);
    const double keep = 1.0 / (1.0 - rate);
    for (Eigen::Index k = 0; k < mask.size(); ++k) mask.data()[k] = mask_rng.bernoulli(rate) ? 0.0 : keep;
    return mask;
  };
  Eigen::MatrixXd data_mask;
  if (options.train && config_.data_dropout > 0.0) {
    data_mask = dropout_mask(n, d, config_.data_dropout, "data-dropout");
    a = a.cwiseProduct(data_mask);
  }

  if (cache) {
    cache->features = x;
    cache->gate = gates.value;
    cache->gate_soft = gates.soft;
    cache->gate_mode = options.gate_mode;
    cache->data_mask = data_mask;
    cache->layer_inputs.clear();
    cache->pre_activations.clear();
  }
  const std::size_t layers = params_.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    if (cache) cache->layer_inputs.push_back(a);
    Eigen::MatrixXd pre = a * params_.weights[l].transpose();
    pre.rowwise() += params_.biases[l].transpose();
    if (l + 1 == layers) {
      a = std::move(pre);
    } else {
      a = pre.cwiseMax(0.0);
      if (cache) cache->pre_activations.push_back(std::move(pre));
    }
  }
  if (options.train && config_.metric_dropout > 0.0) {
    Eigen::MatrixXd mask = dropout_mask(n, a.cols(), config_.metric_dropout, "metric-dropout");
    a = a.cwiseProduct(mask);
    if (cache) cache->metric_mask = std::move(mask);
  } else if (cache) {
    cache->metric_mask.resize(0, 0);
  }
  return a;
}

void EmbeddingModel::backward(const ForwardCache& cache, const Eigen::MatrixXd& d_output, Parameters& grads,
                              const Eigen::VectorXd* d_gate) const {
  Eigen::MatrixXd delta = cache.metric_mask.size() > 0 ? d_output.cwiseProduct(cache.metric_mask) : d_output;
  for (std::size_t l = params_.weights.size(); l-- > 0;) {
    grads.weights[l].noalias() += delta.transpose() * cache.layer_inputs[l];
    grads.biases[l] += delta.colwise().sum().transpose();
    Eigen::MatrixXd d_input = delta * params_.weights[l];
    if (l > 0) {
      delta = d_input.cwiseProduct((cache.pre_activations[l - 1].array() > 0.0).cast<double>().matrix());
    } else {
      delta = std::move(d_input);
    }
  }
  if (!config_.gating || cache.gate_mode == GateMode::Deterministic) return;
  // delta now holds d(loss)/d(gated, masked input).
  if (cache.data_mask.size() > 0) delta = delta.cwiseProduct(cache.data_mask);
  Eigen::VectorXd dg = delta.cwiseProduct(cache.features).colwise().sum().transpose();
  if (d_gate) dg += *d_gate;
  // Straight-through: the soft probability carries the gradient in both modes.
  const Eigen::ArrayXd p = cache.gate_soft.array();
  const Eigen::VectorXd d_gap = (dg.array() * p * (1.0 - p) / config_.gate_temperature).matrix();
  grads.gate_logits.col(0) += d_gap;
  grads.gate_logits.col(1) -= d_gap;
}

std::vector<bool> EmbeddingModel::active_gates() const {
  std::vector<bool> out(config_.input_dim, true);
  if (!config_.gating) return out;
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = params_.gate_logits(static_cast<Eigen::Index>(j), 0) > params_.gate_logits(static_cast<Eigen::Index>(j), 1);
  }
  return out;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError("model matrix has the wrong size", 0);
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

}  // namespace

nlohmann::json EmbeddingModel::to_json() const {
  nlohmann::json j;
  j["format"] = "quartree-model";
  j["version"] = 1;
  j["config"] = {{"input_dim", config_.input_dim},           {"hidden", config_.hidden},
                 {"output_dim", config_.output_dim},         {"gating", config_.gating},
                 {"gate_temperature", config_.gate_temperature}, {"gate_init", config_.gate_init},
                 {"projection", config_.projection},         {"data_dropout", config_.data_dropout},
                 {"metric_dropout", config_.metric_dropout}};
  auto& layers = j["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < params_.weights.size(); ++l) {
    layers.push_back({{"weight", matrix_to_json(params_.weights[l])}, {"bias", matrix_to_json(params_.biases[l])}});
  }
  j["gate_logits"] = matrix_to_json(params_.gate_logits);
  j["projection"] = matrix_to_json(params_.projection);
  return j;
}

EmbeddingModel EmbeddingModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "quartree-model" || j.value("version", 0) != 1) {
    throw ParseError("not a version-1 model file", 0);
  }
  const auto& c = j.at("config");
  ModelConfig config;
  config.input_dim = c.at("input_dim").get<std::size_t>();
  config.hidden = c.at("hidden").get<std::vector<std::size_t>>();
  config.output_dim = c.at("output_dim").get<std::size_t>();
  config.gating = c.at("gating").get<bool>();
  config.gate_temperature = c.at("gate_temperature").get<double>();
  config.gate_init = c.at("gate_init").get<double>();
  config.projection = c.at("projection").get<bool>();
  config.data_dropout = c.at("data_dropout").get<double>();
  config.metric_dropout = c.at("metric_dropout").get<double>();
  EmbeddingModel model(config, 0);
  const auto& layers = j.at("layers");
  if (layers.size() != model.params_.weights.size()) throw ParseError("model layer count mismatch", 0);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    model.params_.weights[l] = matrix_from_json(layers[l].at("weight"));
    model.params_.biases[l] = matrix_from_json(layers[l].at("bias"));
  }
  model.params_.gate_logits = matrix_from_json(j.at("gate_logits"));
  model.params_.projection = matrix_from_json(j.at("projection"));
  return model;
}

}  // namespace quartree
