#include "quartree/harness/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "quartree/error.hpp"

namespace quartree {

namespace {

using nlohmann::json;

// Reads the keys of one JSON object, rejecting keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string where(const char* key) const { return path_ + "." + key; }

  template <typename T>
  void get(const char* key, T& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_unsigned()) throw ConfigError(where(key) + ": expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  template <typename Enum, typename Parse>
  void get_enum(const char* key, Enum& out, Parse parse) {
    std::string text;
    get(key, text);
    if (text.empty()) return;
    const auto parsed = parse(text);
    if (!parsed) throw ConfigError(where(key) + ": unknown value '" + text + "'");
    out = *parsed;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(path_ + ": unknown key '" + item.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::optional<TopologyKind> parse_topology(std::string_view text) {
  if (text == "balanced") return TopologyKind::Balanced;
  if (text == "random") return TopologyKind::Random;
  return std::nullopt;
}

std::optional<GateMode> parse_gate_mode(std::string_view text) {
  if (text == "hard") return GateMode::Hard;
  if (text == "soft") return GateMode::Soft;
  return std::nullopt;
}

std::string_view to_string(TopologyKind kind) { return kind == TopologyKind::Balanced ? "balanced" : "random"; }
std::string_view to_string(GateMode mode) { return mode == GateMode::Soft ? "soft" : "hard"; }

std::uint64_t parse_u64(std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("invalid seed '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

json to_json(const SimulationConfig& c) {
  return {{"n_leaves", c.n_leaves},
          {"topology", to_string(c.topology)},
          {"w_max", c.w_max},
          {"n_signal", c.n_signal},
          {"n_noise", c.n_noise},
          {"n_altsig", c.n_altsig},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"alt_partitions", c.alt_partitions},
          {"n_alt_trees_per_partition", c.n_alt_trees_per_partition},
          {"seed", c.seed}};
}

SimulationConfig simulation_config_from_json(const json& j) {
  SimulationConfig c;
  Section s(j, "simulation");
  s.get("n_leaves", c.n_leaves);
  s.get_enum("topology", c.topology, parse_topology);
  s.get("w_max", c.w_max);
  s.get("n_signal", c.n_signal);
  s.get("n_noise", c.n_noise);
  s.get("n_altsig", c.n_altsig);
  s.get("alpha", c.alpha);
  s.get("beta", c.beta);
  s.get("alt_partitions", c.alt_partitions);
  s.get("n_alt_trees_per_partition", c.n_alt_trees_per_partition);
  s.get("seed", c.seed);
  s.finish();
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (simulation.has_value() == data_dir.has_value()) {
    throw ConfigError("config: exactly one of 'simulation' and 'data_dir' must be given");
  }
  if (simulation) simulation->validate();
  if (data_dir) {
    for (const char* name : {"tree.nwk", "train.csv", "test.csv"}) {
      if (!std::filesystem::exists(*data_dir / name)) {
        throw ConfigError("config: data file " + (*data_dir / name).string() + " does not exist");
      }
    }
  }
  if (seeds.empty()) throw ConfigError("config: no seeds");
  if (threads == 0) throw ConfigError("config: threads must be at least 1");
  if (supervision.mode == SupervisionKind::Partition && supervision.level == 0) {
    throw ConfigError("config: partition level must be at least 1");
  }
  if (!(supervision.kappa >= 0.0 && supervision.kappa <= 1.0)) throw ConfigError("config: kappa must lie in [0, 1]");
  if (!(optimizer.learning_rate >= 0.0) || !(optimizer.momentum >= 0.0 && optimizer.momentum < 1.0) ||
      !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0) || !(optimizer.clip_norm >= 0.0) ||
      !(optimizer.gate_lr_scale >= 0.0)) {
    throw ConfigError("config: invalid optimizer settings");
  }
  loss.validate();
  ModelConfig m = model;
  m.input_dim = 1;
  try {
    m.validate();
  } catch (const InvalidArgumentError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["simulation"] = c.simulation ? to_json(*c.simulation) : json(nullptr);
  j["data_dir"] = c.data_dir ? json(c.data_dir->string()) : json(nullptr);
  j["supervision"] = {{"mode", to_string(c.supervision.mode)}, {"level", c.supervision.level}, {"kappa", c.supervision.kappa}};
  j["model"] = {{"hidden", c.model.hidden},
                {"output_dim", c.model.output_dim},
                {"gating", c.model.gating},
                {"gate_temperature", c.model.gate_temperature},
                {"gate_init", c.model.gate_init},
                {"projection", c.model.projection},
                {"data_dropout", c.model.data_dropout},
                {"metric_dropout", c.model.metric_dropout}};
  const auto& l = c.loss;
  j["loss"] = {{"kind", to_string(l.kind)},
               {"lambda_add", l.lambda_add},
               {"w_close", l.w_close},
               {"w_push", l.w_push},
               {"lambda", l.lambda},
               {"lambda_spar", l.lambda_spar},
               {"m0", l.m0},
               {"metric", to_string(l.metric)},
               {"quartets_per_step", l.quartets_per_step},
               {"alpha", l.quadruplet_alpha()},
               {"beta_margin", l.quadruplet_beta()},
               {"projection_l1", l.projection_l1}};
  j["optimizer"] = {{"kind", to_string(c.optimizer.kind)},
                    {"steps", c.optimizer.steps},
                    {"learning_rate", c.optimizer.learning_rate},
                    {"momentum", c.optimizer.momentum},
                    {"beta2", c.optimizer.beta2},
                    {"clip_norm", c.optimizer.clip_norm},
                    {"gate_lr_scale", c.optimizer.gate_lr_scale}};
  j["eval_interval"] = c.eval_interval;
  j["gate_mode"] = to_string(c.gate_mode);
  j["qd"] = {{"exact_limit", c.qd.exact_limit}, {"samples", c.qd.samples}, {"seed", c.qd.seed}, {"threads", c.qd.threads}};
  j["seeds"] = c.seeds;
  j["permute"] = c.permute ? json(to_string(*c.permute)) : json(nullptr);
  j["output_dir"] = c.output_dir.string();
  j["threads"] = c.threads;
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  Section top(j, "config");
  if (top.has("simulation")) c.simulation = simulation_config_from_json(top.raw("simulation"));
  if (top.has("data_dir")) {
    std::string dir;
    top.get("data_dir", dir);
    c.data_dir = dir;
  }
  if (top.has("supervision")) {
    Section s(top.raw("supervision"), "config.supervision");
    s.get_enum("mode", c.supervision.mode, parse_supervision_kind);
    s.get("level", c.supervision.level);
    s.get("kappa", c.supervision.kappa);
    s.finish();
  }
  if (top.has("model")) {
    Section s(top.raw("model"), "config.model");
    s.get("hidden", c.model.hidden);
    s.get("output_dim", c.model.output_dim);
    s.get("gating", c.model.gating);
    s.get("gate_temperature", c.model.gate_temperature);
    s.get("gate_init", c.model.gate_init);
    s.get("projection", c.model.projection);
    s.get("data_dropout", c.model.data_dropout);
    s.get("metric_dropout", c.model.metric_dropout);
    s.finish();
  }
  if (top.has("loss")) {
    Section s(top.raw("loss"), "config.loss");
    auto& l = c.loss;
    s.get_enum("kind", l.kind, parse_loss_kind);
    s.get("lambda_add", l.lambda_add);
    s.get("w_close", l.w_close);
    s.get("w_push", l.w_push);
    s.get("lambda", l.lambda);
    s.get("lambda_spar", l.lambda_spar);
    s.get("m0", l.m0);
    s.get_enum("metric", l.metric, parse_distance_kind);
    s.get("quartets_per_step", l.quartets_per_step);
    if (s.has("alpha")) {
      double v = 0.0;
      s.get("alpha", v);
      l.alpha = v;
    }
    if (s.has("beta_margin")) {
      double v = 0.0;
      s.get("beta_margin", v);
      l.beta_margin = v;
    }
    s.get("projection_l1", l.projection_l1);
    s.finish();
  }
  if (top.has("optimizer")) {
    Section s(top.raw("optimizer"), "config.optimizer");
    s.get_enum("kind", c.optimizer.kind, parse_optimizer_kind);
    s.get("steps", c.optimizer.steps);
    s.get("learning_rate", c.optimizer.learning_rate);
    s.get("momentum", c.optimizer.momentum);
    s.get("beta2", c.optimizer.beta2);
    s.get("clip_norm", c.optimizer.clip_norm);
    s.get("gate_lr_scale", c.optimizer.gate_lr_scale);
    s.finish();
  }
  top.get("eval_interval", c.eval_interval);
  top.get_enum("gate_mode", c.gate_mode, parse_gate_mode);
  if (top.has("qd")) {
    Section s(top.raw("qd"), "config.qd");
    s.get("exact_limit", c.qd.exact_limit);
    s.get("samples", c.qd.samples);
    s.get("seed", c.qd.seed);
    s.get("threads", c.qd.threads);
    s.finish();
  }
  top.get("seeds", c.seeds);
  if (top.has("permute")) {
    PermutationMode mode{};
    top.get_enum("permute", mode, parse_permutation_mode);
    c.permute = mode;
  }
  std::string out;
  top.get("output_dir", out);
  if (!out.empty()) c.output_dir = out;
  top.get("threads", c.threads);
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

std::vector<std::uint64_t> parse_seed_range(std::string_view text) {
  const auto dots = text.find("..");
  if (dots == std::string_view::npos) return {parse_u64(text)};
  const std::uint64_t lo = parse_u64(text.substr(0, dots));
  const std::uint64_t hi = parse_u64(text.substr(dots + 2));
  if (hi < lo) throw ConfigError("seed range '" + std::string(text) + "' is empty");
  if (hi - lo >= 1'000'000) throw ConfigError("seed range '" + std::string(text) + "' is too large");
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  return seeds;
}

void apply_environment(ExperimentConfig& config) {
  if (const char* out = std::getenv("QUARTREE_OUT"); out && *out) config.output_dir = out;
  if (const char* threads = std::getenv("QUARTREE_THREADS"); threads && *threads) {
    const auto v = parse_u64(threads);
    if (v == 0) throw ConfigError("QUARTREE_THREADS must be at least 1");
    config.threads = static_cast<std::size_t>(v);
  }
}

}  // namespace quartree
