#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quartree/harness/config.hpp"
#include "quartree/metrics.hpp"

namespace quartree {

/// Process exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitNumerical = 4 };

/// Exit code matching an exception type.
int exit_code_for(const std::exception& e) noexcept;

/// Writes tree.nwk, train.csv, test.csv, alt_<k>.nwk and config.json into
/// `out` (created when missing).
Dataset cmd_simulate(const SimulationConfig& config, const std::filesystem::path& out);

/// Reads a directory written by cmd_simulate (alternative trees excluded).
Dataset load_dataset(const std::filesystem::path& dir);

struct SeedReport {
  std::uint64_t seed = 0;
  /// Empty on success.
  std::string error;
  int error_code = kExitOk;
  EvalReport baseline_train, baseline_test;
  EvalReport trained_train, trained_test;
  std::size_t steps = 0;
  std::vector<std::string> artifacts;
};

struct Summary {
  double mean = 0.0;
  /// Sample standard deviation; 0 for a single value.
  double sd = 0.0;
  std::size_t count = 0;
};

Summary summarize(const std::vector<double>& values);

struct RunReport {
  nlohmann::json config;
  std::vector<SeedReport> seeds;
  /// Keyed by metric name, over successful seeds.
  std::map<std::string, Summary> aggregate;
  double wall_clock_seconds = 0.0;
  std::filesystem::path report_path;

  bool all_ok() const;
};

/// Named per-seed values that enter the aggregate.
std::map<std::string, std::optional<double>> seed_metrics(const SeedReport& seed);
std::map<std::string, Summary> aggregate_seeds(const std::vector<SeedReport>& seeds);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const RunReport& report);

/// Trains and evaluates one seed. Failures are recorded in the report.
/// With `out_dir`, history CSVs, the model and the reconstructed trees are
/// written there.
SeedReport run_seed(const ExperimentConfig& config, std::uint64_t seed,
                    const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// All seeds, then report.json plus per-seed history CSVs and models under
/// config.output_dir.
RunReport cmd_run(const ExperimentConfig& config);

/// Quartet statistics tables, each present when its inputs are given.
struct QuartetStatsRequest {
  std::optional<std::pair<std::uint64_t, std::uint64_t>> k_range;
  std::optional<std::filesystem::path> tree;
  std::vector<std::size_t> levels;
  std::vector<double> kappas;
  std::optional<std::uint64_t> n;
};

nlohmann::json cmd_quartet_stats(const QuartetStatsRequest& request);

/// NJ tree of a feature CSV (row distances under `metric`) or, with
/// `distance_input`, of a distance-matrix CSV.
Tree cmd_reconstruct(const std::filesystem::path& input, bool distance_input, DistanceKind metric);

nlohmann::json cmd_evaluate(const Tree& reference, const Tree& estimate, const QdMode& mode = {});

nlohmann::json cmd_tree_stats(const Tree& tree);

}  // namespace quartree
