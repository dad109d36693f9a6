#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "quartree/feature_table.hpp"
#include "quartree/learn/train.hpp"
#include "quartree/simulate.hpp"

namespace quartree {

struct SupervisionConfig {
  SupervisionKind mode = SupervisionKind::Supervised;
  /// Clade level of the partition prior.
  std::size_t level = 2;
  /// Labeled-leaf fraction of the partial prior.
  double kappa = 0.5;
};

/// One experiment: a data source, the learning setup and the seeds to sweep.
/// Exactly one of `simulation` and `data_dir` is set; a data directory holds
/// tree.nwk, train.csv and test.csv.
struct ExperimentConfig {
  std::optional<SimulationConfig> simulation;
  std::optional<std::filesystem::path> data_dir;
  SupervisionConfig supervision;
  /// input_dim is taken from the data.
  ModelConfig model;
  LossConfig loss;
  OptimizerConfig optimizer;
  std::size_t eval_interval = 100;
  GateMode gate_mode = GateMode::Hard;
  QdMode qd;
  std::vector<std::uint64_t> seeds{0};
  std::optional<PermutationMode> permute;
  std::filesystem::path output_dir = "runs";
  /// Seeds processed concurrently.
  std::size_t threads = 1;

  /// Throws ConfigError, including for data files that do not exist.
  void validate() const;
};

nlohmann::json to_json(const SimulationConfig& config);
SimulationConfig simulation_config_from_json(const nlohmann::json& j);

/// Every field with its resolved value.
nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys and ill-typed values raise
/// ConfigError. Validates the result.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// "N" or "N..M" (inclusive).
std::vector<std::uint64_t> parse_seed_range(std::string_view text);

/// QUARTREE_OUT overrides the output root and QUARTREE_THREADS the seed
/// worker count when set.
void apply_environment(ExperimentConfig& config);

}  // namespace quartree
