#include "quartree/harness/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "quartree/error.hpp"
#include "quartree/newick.hpp"
#include "quartree/quartets.hpp"
#include "quartree/reconstruct.hpp"

namespace quartree {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  return kExitData;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << text;
  if (!out) throw IngestionError("failed writing " + path.string());
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IngestionError("cannot create output directory " + dir.string());
}

std::uint64_t derived_seed(std::uint64_t seed, std::string_view stream) {
  Rng rng = Rng(seed).split(stream);
  return rng();
}

json fraction_json(const Fraction& f) {
  return {{"value", f.value()}, {"exact", std::to_string(f.num) + "/" + std::to_string(f.den)}};
}

}  // namespace

Dataset cmd_simulate(const SimulationConfig& config, const fs::path& out) {
  Dataset data = simulate_dataset(config);
  ensure_directory(out);
  write_newick_file(data.tree, out / "tree.nwk", 17);
  save_feature_csv(data.train, out / "train.csv");
  save_feature_csv(data.test, out / "test.csv");
  for (std::size_t k = 0; k < data.alt_trees.size(); ++k) {
    write_newick_file(data.alt_trees[k], out / ("alt_" + std::to_string(k) + ".nwk"), 17);
  }
  write_text(out / "config.json", to_json(config).dump(2) + "\n");
  return data;
}

Dataset load_dataset(const fs::path& dir) {
  Dataset data;
  data.tree = read_newick_file(dir / "tree.nwk");
  data.train = load_feature_csv(dir / "train.csv");
  data.test = load_feature_csv(dir / "test.csv");
  return data;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

bool RunReport::all_ok() const {
  return std::all_of(seeds.begin(), seeds.end(), [](const SeedReport& s) { return s.error.empty(); });
}

std::map<std::string, std::optional<double>> seed_metrics(const SeedReport& seed) {
  std::map<std::string, std::optional<double>> m;
  if (!seed.error.empty()) return m;
  m["baseline_train_rf"] = seed.baseline_train.rf;
  m["baseline_train_qd"] = seed.baseline_train.qd;
  m["baseline_test_rf"] = seed.baseline_test.rf;
  m["baseline_test_qd"] = seed.baseline_test.qd;
  m["train_rf"] = seed.trained_train.rf;
  m["train_qd"] = seed.trained_train.qd;
  m["test_rf"] = seed.trained_test.rf;
  m["test_qd"] = seed.trained_test.qd;
  m["delta_test_rf"] = seed.trained_test.delta_rf;
  m["delta_test_qd"] = seed.trained_test.delta_qd;
  for (const auto& [cls, base] : seed.baseline_test.stratified) {
    const std::string name(to_string(cls));
    m["baseline_test_qd_" + name] = base;
    const auto it = seed.trained_test.stratified.find(cls);
    if (it == seed.trained_test.stratified.end()) continue;
    m["test_qd_" + name] = it->second;
    m["delta_test_qd_" + name] = base == 0.0 ? std::nullopt : std::optional(delta_percent(base, it->second));
  }
  return m;
}

std::map<std::string, Summary> aggregate_seeds(const std::vector<SeedReport>& seeds) {
  std::map<std::string, std::vector<double>> columns;
  for (const auto& s : seeds) {
    for (const auto& [name, value] : seed_metrics(s)) {
      if (value) columns[name].push_back(*value);
    }
  }
  std::map<std::string, Summary> out;
  for (const auto& [name, values] : columns) out[name] = summarize(values);
  return out;
}

json to_json(const EvalReport& r) {
  json j{{"rf", r.rf}, {"qd", r.qd}, {"qd_exact", r.qd_exact}, {"qd_samples", r.qd_samples}, {"qd_seed", r.qd_seed}};
  j["delta_rf"] = r.delta_rf ? json(*r.delta_rf) : json(nullptr);
  j["delta_qd"] = r.delta_qd ? json(*r.delta_qd) : json(nullptr);
  json strat = json::object();
  for (const auto& [cls, qd] : r.stratified) strat[std::string(to_string(cls))] = qd;
  j["stratified_qd"] = strat;
  return j;
}

json to_json(const RunReport& r) {
  json seeds = json::array();
  for (const auto& s : r.seeds) {
    json e{{"seed", s.seed}, {"status", s.error.empty() ? "ok" : "error"}};
    if (!s.error.empty()) {
      e["error"] = s.error;
      e["error_code"] = s.error_code;
    } else {
      e["steps"] = s.steps;
      e["baseline"] = {{"train", to_json(s.baseline_train)}, {"test", to_json(s.baseline_test)}};
      e["trained"] = {{"train", to_json(s.trained_train)}, {"test", to_json(s.trained_test)}};
      json metrics = json::object();
      for (const auto& [name, value] : seed_metrics(s)) metrics[name] = value ? json(*value) : json(nullptr);
      e["metrics"] = metrics;
    }
    e["artifacts"] = s.artifacts;
    seeds.push_back(std::move(e));
  }
  json aggregate = json::object();
  for (const auto& [name, summary] : r.aggregate) {
    aggregate[name] = {{"mean", summary.mean}, {"sd", summary.sd}, {"count", summary.count}};
  }
  return {{"format", "quartree-run-report"},
          {"version", 1},
          {"config", r.config},
          {"seeds", seeds},
          {"aggregate", aggregate},
          {"wall_clock_seconds", r.wall_clock_seconds}};
}

SeedReport run_seed(const ExperimentConfig& config, std::uint64_t seed, const std::optional<fs::path>& out_dir) {
  SeedReport report;
  report.seed = seed;
  std::optional<TrainHistory> history;
  try {
    Dataset data;
    if (config.simulation) {
      SimulationConfig sim = *config.simulation;
      sim.seed = seed;
      data = simulate_dataset(sim);
    } else {
      data = load_dataset(*config.data_dir);
    }
    // Leaf i of `truth` is row i of the unpermuted training table.
    const Tree truth = data.tree.with_leaf_order(data.train.row_labels());
    const FeatureTable train_table =
        config.permute ? permute_dataset(data.train, *config.permute, derived_seed(seed, "permute")) : data.train;
    const Tree supervision_tree = truth.with_leaf_order(train_table.row_labels());
    const std::size_t n = train_table.rows();

    std::function<LabelClass(const Quartet&)> stratum;
    Supervision supervision;
    switch (config.supervision.mode) {
      case SupervisionKind::Supervised: supervision = Supervision::supervised(supervision_tree); break;
      case SupervisionKind::Partition: {
        supervision = Supervision::partition_prior(PartitionPrior::from_tree(supervision_tree, config.supervision.level));
        const auto prior = PartitionPrior::from_tree(truth, config.supervision.level);
        stratum = [prior](const Quartet& q) {
          return classify_by_partition(q, prior).known ? LabelClass::Known : LabelClass::Unknown;
        };
        break;
      }
      case SupervisionKind::Partial: {
        const auto labels = LabelPrior::random(n, config.supervision.kappa, derived_seed(seed, "labels"));
        supervision = Supervision::partial(labels, supervision_tree);
        stratum = [labels](const Quartet& q) { return classify_by_labels(q, labels); };
        break;
      }
      case SupervisionKind::Unsupervised: break;
    }

    const auto metric = config.loss.metric;
    const auto raw_tree = [&](const FeatureTable& t) { return neighbor_joining(feature_distances(t, metric)); };
    report.baseline_train = evaluate_trees(truth, raw_tree(data.train), config.qd, stratum);
    report.baseline_test = evaluate_trees(truth, raw_tree(data.test), config.qd, stratum);

    ModelConfig model_config = config.model;
    model_config.input_dim = train_table.cols();
    EmbeddingModel model(model_config, derived_seed(seed, "model"));
    TrainConfig train_config{config.loss, config.optimizer, config.eval_interval, config.gate_mode, config.qd};
    TrainResult trained;
    try {
      trained = train(std::move(model), train_table, &data.test, supervision, train_config, derived_seed(seed, "train"),
                      &truth);
    } catch (const TrainingDivergedError& e) {
      history = e.history();
      throw;
    }
    history = trained.history;
    report.steps = trained.history.steps.size();

    // Without a single update nothing has been learned, and the reconstruction
    // is the raw-data one.
    const bool untrained = trained.history.steps.empty();
    const Tree train_tree = untrained ? raw_tree(data.train) : embed_and_reconstruct(trained.model, train_table, metric);
    const Tree test_tree = untrained ? raw_tree(data.test) : embed_and_reconstruct(trained.model, data.test, metric);
    report.trained_train = evaluate_trees(truth, train_tree, config.qd, stratum);
    report.trained_test = evaluate_trees(truth, test_tree, config.qd, stratum);
    const auto add_deltas = [](const EvalReport& base, EvalReport& recon) {
      if (base.rf != 0.0) recon.delta_rf = delta_percent(base.rf, recon.rf);
      if (base.qd != 0.0) recon.delta_qd = delta_percent(base.qd, recon.qd);
    };
    add_deltas(report.baseline_train, report.trained_train);
    add_deltas(report.baseline_test, report.trained_test);

    if (out_dir) {
      ensure_directory(*out_dir);
      const auto add = [&](const fs::path& p) { report.artifacts.push_back(p.string()); };
      write_text(*out_dir / "model.json", trained.model.to_json().dump() + "\n");
      add(*out_dir / "model.json");
      write_newick_file(train_tree, *out_dir / "train_tree.nwk", 17);
      add(*out_dir / "train_tree.nwk");
      write_newick_file(test_tree, *out_dir / "test_tree.nwk", 17);
      add(*out_dir / "test_tree.nwk");
    }
  } catch (const std::exception& e) {
    report.error = e.what();
    report.error_code = exit_code_for(e);
  }
  if (out_dir && history) {
    try {
      ensure_directory(*out_dir);
      write_text(*out_dir / "history.csv", format_step_history_csv(*history));
      write_text(*out_dir / "evals.csv", format_eval_history_csv(*history));
      report.artifacts.push_back((*out_dir / "history.csv").string());
      report.artifacts.push_back((*out_dir / "evals.csv").string());
    } catch (const std::exception& e) {
      if (report.error.empty()) {
        report.error = e.what();
        report.error_code = exit_code_for(e);
      }
    }
  }
  return report;
}

RunReport cmd_run(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ensure_directory(config.output_dir);
  RunReport report;
  report.config = to_json(config);
  report.seeds.resize(config.seeds.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < config.seeds.size(); k = next++) {
      const auto seed = config.seeds[k];
      report.seeds[k] = run_seed(config, seed, config.output_dir / ("seed_" + std::to_string(seed)));
    }
  };
  const std::size_t workers = std::min(config.threads, config.seeds.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  report.aggregate = aggregate_seeds(report.seeds);
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.report_path = config.output_dir / "report.json";
  write_text(report.report_path, to_json(report).dump(2) + "\n");
  return report;
}

json cmd_quartet_stats(const QuartetStatsRequest& request) {
  json out = json::object();
  if (request.k_range) {
    const auto [lo, hi] = *request.k_range;
    if (lo < 1 || hi < lo) throw InvalidArgumentError("quartet-stats: invalid k range");
    json rows = json::array();
    std::uint64_t best_k = lo;
    double best = -1.0;
    for (std::uint64_t k = lo; k <= hi; ++k) {
      const auto p = theoretical_partition_proportions(k);
      const auto resolvable = resolvable_fraction(k);
      if (resolvable.value() > best) {
        best = resolvable.value();
        best_k = k;
      }
      rows.push_back({{"k", k},
                      {"four", fraction_json(p[0])},
                      {"three_one", fraction_json(p[1])},
                      {"two_two", fraction_json(p[2])},
                      {"two_one_one", fraction_json(p[3])},
                      {"one_one_one_one", fraction_json(p[4])},
                      {"resolvable", fraction_json(resolvable)}});
    }
    out["partition_proportions"] = {{"rows", rows}, {"argmax_resolvable_k", best_k}};
  }
  if (request.tree) {
    const Tree tree = read_newick_file(*request.tree);
    json rows = json::array();
    for (auto level : request.levels) {
      const auto c = exact_known_counts(tree, level);
      rows.push_back({{"level", level},
                      {"total", c.total},
                      {"two_two", c.two_two},
                      {"two_one_one", c.two_one_one},
                      {"known", c.known()},
                      {"unknown", c.unknown()},
                      {"known_fraction", c.known_fraction()}});
    }
    out["exact_counts"] = rows;
  } else if (!request.levels.empty()) {
    json rows = json::array();
    for (auto level : request.levels) {
      json row{{"level", level}, {"unknown_fraction", balanced_unknown_fraction(level)}};
      if (request.n) row["exact_unknown_fraction"] = balanced_unknown_fraction(level, request.n);
      rows.push_back(row);
    }
    out["balanced_unknown"] = rows;
  }
  if (!request.kappas.empty()) {
    json rows = json::array();
    for (double kappa : request.kappas) {
      const auto f = labeled_fraction_curve(kappa, request.n);
      json row{{"kappa", kappa}, {"known", f.known}, {"partial", f.partial}, {"unknown", f.unknown}};
      if (f.known_count) {
        row["labeled"] = *f.labeled;
        row["known_count"] = *f.known_count;
        row["partial_count"] = *f.partial_count;
        row["unknown_count"] = *f.unknown_count;
      }
      rows.push_back(row);
    }
    out["label_fractions"] = rows;
  }
  return out;
}

Tree cmd_reconstruct(const fs::path& input, bool distance_input, DistanceKind metric) {
  if (distance_input) return neighbor_joining(load_distance_csv(input));
  return neighbor_joining(feature_distances(load_feature_csv(input), metric));
}

json cmd_evaluate(const Tree& reference, const Tree& estimate, const QdMode& mode) {
  return to_json(evaluate_trees(reference, estimate, mode));
}

json cmd_tree_stats(const Tree& tree) {
  json out{{"leaves", tree.leaf_count()}, {"rooted", tree.rooted()}, {"binary", tree.is_binary()}};
  for (bool unit : {false, true}) {
    const auto s = tree_stats(tree, unit);
    out[unit ? "unit_lengths" : "branch_lengths"] = {{"colless", s.colless ? json(*s.colless) : json(nullptr)},
                                                     {"diameter", s.diameter},
                                                     {"depth_mean", s.depth_mean},
                                                     {"depth_sd", s.depth_sd},
                                                     {"faiths_pd", s.faiths_pd},
                                                     {"mean_pairwise_distance", s.mean_pairwise_distance}};
  }
  return out;
}

}  // namespace quartree
