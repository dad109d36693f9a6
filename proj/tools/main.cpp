// quartree command-line tool: simulate, run, reconstruct, evaluate,
// quartet-stats and tree-stats.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "quartree/error.hpp"
#include "quartree/harness/commands.hpp"
#include "quartree/newick.hpp"

namespace {

using namespace quartree;
using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

DistanceKind metric_from(const std::string& text) {
  const auto kind = parse_distance_kind(text);
  if (!kind) throw ConfigError("unknown metric '" + text + "' (expected euclidean or squared)");
  return *kind;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream file(out, std::ios::binary);
  if (!file) throw IngestionError("cannot write " + out);
  file << text;
}

// Flattens each array-of-objects table of a quartet-stats result to CSV.
std::string stats_csv(const json& stats) {
  std::string out;
  for (const auto& [section, body] : stats.items()) {
    const json& rows = body.is_object() ? body.at("rows") : body;
    out += "# " + section + "\n";
    bool header = true;
    for (const auto& row : rows) {
      if (header) {
        bool first = true;
        for (const auto& [key, _] : row.items()) {
          out += (first ? "" : ",") + key;
          first = false;
        }
        out += "\n";
        header = false;
      }
      bool first = true;
      for (const auto& [_, value] : row.items()) {
        out += first ? "" : ",";
        first = false;
        out += value.is_object() ? value.at("exact").get<std::string>() : value.dump();
      }
      out += "\n";
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quartree: tree-metric learning from noisy leaf features"};
  app.require_subcommand(1);

  std::string config_path, out_path, metric = "euclidean", permute, seeds_text;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  auto* simulate = app.add_subcommand("simulate", "Simulate a Brownian-motion dataset into a directory");
  simulate->add_option("--config", config_path, "Simulation JSON (or an experiment config with a 'simulation' block)");
  simulate->add_option("--seed", seed, "Simulation seed");
  simulate->add_option("--out", out_path, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Run an experiment over one or more seeds");
  run->add_option("--config", config_path, "Experiment config JSON")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Single seed");
  run->add_option("--seeds", seeds_text, "Inclusive seed range N..M")->excludes(seed_opt);
  run->add_option("--threads", threads, "Seeds run concurrently");
  run->add_option("--out", out_path, "Output directory");
  run->add_option("--metric", metric, "Embedding metric: euclidean or squared");
  run->add_option("--permute", permute, "Null model: leaf, cell or gene");

  std::string input, reference, estimate, tree_path;
  bool distances = false;
  auto* reconstruct = app.add_subcommand("reconstruct", "Neighbor-joining tree from features or distances");
  reconstruct->add_option("--input", input, "Feature CSV, or distance CSV with --distances")->required();
  reconstruct->add_flag("--distances", distances, "Input is a distance matrix");
  reconstruct->add_option("--metric", metric, "Row metric for feature input: euclidean or squared");
  reconstruct->add_option("--out", out_path, "Newick output (stdout when absent)");

  std::size_t qd_samples = 100000;
  auto* evaluate = app.add_subcommand("evaluate", "RF and quartet distance between two trees");
  evaluate->add_option("--reference", reference, "Reference Newick")->required();
  evaluate->add_option("--estimate", estimate, "Estimated Newick")->required();
  evaluate->add_option("--seed", seed, "Seed for sampled quartet distance");
  evaluate->add_option("--threads", threads, "Threads for exact quartet distance");
  evaluate->add_option("--qd-samples", qd_samples, "Quartets sampled when exact enumeration is too large");
  evaluate->add_option("--out", out_path, "JSON output (stdout when absent)");

  QuartetStatsRequest stats;
  std::string k_range, format = "json";
  std::vector<std::size_t> levels;
  std::vector<double> kappas;
  std::uint64_t n_leaves = 0;
  auto* quartet_stats = app.add_subcommand("quartet-stats", "Partition and label-prior quartet statistics");
  quartet_stats->add_option("--k-range", k_range, "Clade counts N..M for theoretical proportions");
  quartet_stats->add_option("--tree", tree_path, "Rooted Newick tree for exact known-quartet counts");
  quartet_stats->add_option("--level", levels, "Clade levels (with --tree, or balanced closed form)");
  quartet_stats->add_option("--kappa", kappas, "Labeled-leaf fractions");
  quartet_stats->add_option("--n", n_leaves, "Leaf count for exact variants");
  quartet_stats->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  quartet_stats->add_option("--out", out_path, "Output file (stdout when absent)");

  auto* tree_stats_cmd = app.add_subcommand("tree-stats", "Shape statistics of a Newick tree");
  tree_stats_cmd->add_option("--tree", tree_path, "Newick tree")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      SimulationConfig config;
      if (!config_path.empty()) {
        const json j = read_json_file(config_path);
        config = simulation_config_from_json(j.contains("simulation") ? j.at("simulation") : j);
      }
      if (simulate->count("--seed")) config.seed = seed;
      config.validate();
      const auto data = cmd_simulate(config, out_path);
      std::cout << "wrote " << data.train.rows() << " leaves x " << data.train.cols() << " features to " << out_path
                << "\n";
      return kExitOk;
    }
    if (run->parsed()) {
      ExperimentConfig config = load_experiment_config(config_path);
      apply_environment(config);
      if (run->count("--seed")) config.seeds = {seed};
      if (!seeds_text.empty()) config.seeds = parse_seed_range(seeds_text);
      if (threads > 0) config.threads = threads;
      if (!out_path.empty()) config.output_dir = out_path;
      if (run->count("--metric")) config.loss.metric = metric_from(metric);
      if (!permute.empty()) {
        const auto mode = parse_permutation_mode(permute);
        if (!mode) throw ConfigError("unknown permutation mode '" + permute + "'");
        config.permute = *mode;
      }
      config.validate();
      const RunReport report = cmd_run(config);
      int code = kExitOk;
      for (const auto& s : report.seeds) {
        if (s.error.empty()) continue;
        std::cerr << "seed " << s.seed << " failed: " << s.error << "\n";
        if (code == kExitOk) code = s.error_code;
      }
      std::cout << "report: " << report.report_path.string() << "\n";
      for (const auto& name : {"baseline_test_rf", "test_rf", "baseline_test_qd", "test_qd"}) {
        const auto it = report.aggregate.find(name);
        if (it == report.aggregate.end()) continue;
        std::printf("%-18s mean %.4f  sd %.4f  (n=%zu)\n", name, it->second.mean, it->second.sd, it->second.count);
      }
      return code;
    }
    if (reconstruct->parsed()) {
      const Tree tree = cmd_reconstruct(input, distances, metric_from(metric));
      emit(write_newick(tree, 17) + "\n", out_path);
      return kExitOk;
    }
    if (evaluate->parsed()) {
      QdMode mode;
      mode.seed = seed;
      mode.samples = qd_samples;
      if (threads > 0) mode.threads = threads;
      const json report = cmd_evaluate(read_newick_file(reference), read_newick_file(estimate), mode);
      emit(report.dump(2) + "\n", out_path);
      return kExitOk;
    }
    if (quartet_stats->parsed()) {
      if (!k_range.empty()) {
        const auto ks = parse_seed_range(k_range);
        stats.k_range = std::pair{ks.front(), ks.back()};
      }
      if (!tree_path.empty()) stats.tree = tree_path;
      stats.levels = levels;
      stats.kappas = kappas;
      if (quartet_stats->count("--n")) stats.n = n_leaves;
      const json result = cmd_quartet_stats(stats);
      emit(format == "csv" ? stats_csv(result) : result.dump(2) + "\n", out_path);
      return kExitOk;
    }
    if (tree_stats_cmd->parsed()) {
      std::cout << cmd_tree_stats(read_newick_file(tree_path)).dump(2) << "\n";
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}
