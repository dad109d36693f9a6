#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "quartree/error.hpp"
#include "quartree/harness/commands.hpp"
#include "quartree/newick.hpp"
#include "quartree/simulate.hpp"

using namespace quartree;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "quartree_tests" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig tiny_experiment(std::size_t steps) {
  ExperimentConfig c;
  SimulationConfig sim;
  sim.n_leaves = 16;
  sim.n_signal = 10;
  sim.n_noise = 10;
  c.simulation = sim;
  c.model.hidden = {16};
  c.model.output_dim = 8;
  c.optimizer.steps = steps;
  c.loss.quartets_per_step = 16;
  c.eval_interval = 0;
  c.seeds = {0, 1, 2};
  return c;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("simulate writes a deterministic dataset directory") {
    SimulationConfig c;
    c.n_leaves = 64;
    c.n_signal = 20;
    c.n_noise = 20;
    c.alpha = 0.5;
    c.n_altsig = 20;
    c.beta = 0.5;
    c.seed = 4;
    const auto a = scratch("sim_a") / "nested";
    const auto b = scratch("sim_b");
    const auto data = cmd_simulate(c, a);
    cmd_simulate(c, b);
    CHECK(data.train.cols() == 60);
    for (const char* f : {"tree.nwk", "train.csv", "test.csv", "alt_0.nwk", "config.json"}) {
      CAPTURE(f);
      REQUIRE(fs::exists(a / f));
      CHECK(slurp(a / f) == slurp(b / f));
    }
    const auto back = load_dataset(a);
    CHECK(back.train.values() == data.train.values());
    CHECK(back.tree.structurally_equal(data.tree, 1e-12));
    CHECK(back.train.roles() == data.train.roles());
  }

  TEST_CASE("zero training steps reproduce the baseline") {
    auto c = tiny_experiment(0);
    c.seeds = {3};
    const auto r = run_seed(c, 3);
    REQUIRE(r.error.empty());
    CHECK(r.trained_test.rf == r.baseline_test.rf);
    CHECK(r.trained_test.qd == r.baseline_test.qd);
    CHECK(r.trained_train.rf == r.baseline_train.rf);
    if (r.baseline_test.rf > 0) CHECK(*r.trained_test.delta_rf == 0.0);
    if (r.baseline_test.qd > 0) CHECK(*r.trained_test.delta_qd == 0.0);
  }

  TEST_CASE("run report aggregates are recomputable and deterministic") {
    auto c = tiny_experiment(30);
    c.output_dir = scratch("run_a");
    c.threads = 2;
    const auto report = cmd_run(c);
    REQUIRE(report.all_ok());
    REQUIRE(report.seeds.size() == 3);
    for (const auto& [name, summary] : report.aggregate) {
      std::vector<double> values;
      for (const auto& s : report.seeds) {
        const auto m = seed_metrics(s);
        if (m.contains(name) && m.at(name)) values.push_back(*m.at(name));
      }
      CAPTURE(name);
      REQUIRE(values.size() == summary.count);
      double mean = 0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double ss = 0;
      for (double v : values) ss += (v - mean) * (v - mean);
      CHECK(summary.mean == doctest::Approx(mean));
      CHECK(summary.sd == doctest::Approx(values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0));
    }
    REQUIRE(fs::exists(report.report_path));
    for (const char* f : {"history.csv", "evals.csv", "model.json", "train_tree.nwk", "test_tree.nwk"})
      CHECK(fs::exists(c.output_dir / "seed_1" / f));

    const auto stripped = [](nlohmann::json j) {
      j.erase("wall_clock_seconds");
      return j.dump();
    };
    const auto again = cmd_run(c);
    CHECK(stripped(to_json(again)) == stripped(to_json(report)));

    const auto embedded = nlohmann::json::parse(slurp(report.report_path));
    CHECK(embedded.at("config") == to_json(c));
    CHECK(embedded.at("config").at("loss").contains("lambda_spar"));
    CHECK(embedded.at("config").at("optimizer").contains("momentum"));
  }

  TEST_CASE("permutation mode reaches training") {
    auto c = tiny_experiment(40);
    const auto plain = run_seed(c, 1);
    c.permute = PermutationMode::Leaf;
    const auto permuted = run_seed(c, 1);
    REQUIRE(plain.error.empty());
    REQUIRE(permuted.error.empty());
    CHECK(plain.baseline_test.rf == permuted.baseline_test.rf);
    CHECK(plain.trained_train.rf != permuted.trained_train.rf);
  }

  TEST_CASE("seed failures are recorded and the run continues") {
    auto c = tiny_experiment(50);
    c.optimizer.learning_rate = 1e6;
    c.loss.metric = DistanceKind::SquaredEuclidean;
    c.output_dir = scratch("diverge");
    c.seeds = {0, 1};
    const auto r = cmd_run(c);
    CHECK_FALSE(r.all_ok());
    CHECK(r.seeds.size() == 2);
    for (const auto& s : r.seeds) {
      CHECK(s.error_code == kExitNumerical);
      CHECK(fs::exists(c.output_dir / ("seed_" + std::to_string(s.seed)) / "history.csv"));
    }
  }

  TEST_CASE("config round trip and validation") {
    auto c = tiny_experiment(7);
    c.loss.alpha = 0.3;
    c.permute = PermutationMode::Gene;
    const auto j = to_json(c);
    CHECK(to_json(experiment_config_from_json(j)) == j);

    auto unknown = j;
    unknown["loss"]["lamda"] = 1.0;
    CHECK_THROWS_AS(experiment_config_from_json(unknown), ConfigError);
    auto typed = j;
    typed["optimizer"]["steps"] = -3;
    CHECK_THROWS_AS(experiment_config_from_json(typed), ConfigError);
    auto both = j;
    both["data_dir"] = "/nonexistent";
    CHECK_THROWS_AS(experiment_config_from_json(both), ConfigError);
    CHECK_THROWS_AS(load_experiment_config(scratch("nope") / "missing.json"), ConfigError);

    CHECK(experiment_config_from_json(nlohmann::json{{"simulation", nlohmann::json::object()}}).optimizer.steps ==
          OptimizerConfig{}.steps);
    CHECK(parse_seed_range("4") == std::vector<std::uint64_t>{4});
    CHECK(parse_seed_range("2..5") == std::vector<std::uint64_t>{2, 3, 4, 5});
    CHECK_THROWS_AS(parse_seed_range("5..2"), ConfigError);
  }

  TEST_CASE("environment overrides") {
    auto c = tiny_experiment(1);
    ::setenv("QUARTREE_OUT", "/tmp/elsewhere", 1);
    ::setenv("QUARTREE_THREADS", "3", 1);
    apply_environment(c);
    ::unsetenv("QUARTREE_OUT");
    ::unsetenv("QUARTREE_THREADS");
    CHECK(c.output_dir == fs::path("/tmp/elsewhere"));
    CHECK(c.threads == 3);
  }

  TEST_CASE("exit codes") {
    CHECK(exit_code_for(ConfigError("x")) == kExitConfig);
    CHECK(exit_code_for(IngestionError("x")) == kExitData);
    CHECK(exit_code_for(ParseError("x", 0)) == kExitData);
    CHECK(exit_code_for(DegenerateInputError("x")) == kExitData);
    CHECK(exit_code_for(NumericalError("x")) == kExitNumerical);
    CHECK(exit_code_for(TrainingDivergedError("x", {})) == kExitNumerical);
  }

  TEST_CASE("quartet statistics tables") {
    const auto tree_path = scratch("stats") / "b64.nwk";
    fs::create_directories(tree_path.parent_path());
    write_newick_file(full_binary_topology(6), tree_path);
    QuartetStatsRequest req;
    req.k_range = std::pair<std::uint64_t, std::uint64_t>{2, 16};
    req.tree = tree_path;
    req.levels = {1, 2, 3, 4};
    req.kappas = {0.0, 0.5, 1.0};
    const auto out = cmd_quartet_stats(req);
    CHECK(out.at("partition_proportions").at("argmax_resolvable_k") == 4);
    const std::vector<std::uint64_t> known{246016, 455040, 323008, 165600};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(out.at("exact_counts")[i].at("known").get<std::uint64_t>() == known[i]);
      CHECK(out.at("exact_counts")[i].at("total").get<std::uint64_t>() == 635376);
    }
    const auto& fr = out.at("label_fractions");
    CHECK(fr[0].at("known").get<double>() == 0.0);
    CHECK(fr[0].at("unknown").get<double>() == 1.0);
    CHECK(fr[2].at("known").get<double>() == 1.0);
    CHECK(fr[1].at("known").get<double>() == doctest::Approx(0.0625));
    QuartetStatsRequest closed;
    closed.levels = {1, 2};
    closed.n = 64;
    const auto bal = cmd_quartet_stats(closed).at("balanced_unknown");
    CHECK(bal[0].at("unknown_fraction").get<double>() == doctest::Approx(0.625));
    CHECK(bal[1].at("exact_unknown_fraction").get<double>() == doctest::Approx(1.0 - 455040.0 / 635376.0));
  }

  TEST_CASE("reconstruct, evaluate and tree-stats commands") {
    const auto dir = scratch("cmds");
    SimulationConfig c;
    c.n_leaves = 16;
    c.n_noise = 0;
    c.seed = 2;
    const auto data = cmd_simulate(c, dir);
    const Tree from_features = cmd_reconstruct(dir / "train.csv", false, DistanceKind::SquaredEuclidean);
    CHECK(from_features.leaf_count() == 16);
    save_distance_csv(path_distance_matrix(data.tree), dir / "d.csv");
    const Tree exact = cmd_reconstruct(dir / "d.csv", true, DistanceKind::Euclidean);
    const auto eval = cmd_evaluate(data.tree, exact);
    CHECK(eval.at("rf").get<double>() == 0.0);
    CHECK(eval.at("qd").get<double>() == 0.0);
    const auto stats = cmd_tree_stats(full_binary_topology(4));
    CHECK(stats.dump().find("colless") != std::string::npos);
    CHECK_THROWS_AS(cmd_reconstruct(dir / "missing.csv", false, DistanceKind::Euclidean), IngestionError);
  }
}
