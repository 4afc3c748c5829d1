#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "predset/experiment.hpp"
#include "predset/hardness.hpp"
#include "predset/ingest.hpp"
#include "predset/optimizer.hpp"
#include "predset/verify.hpp"

namespace fs = std::filesystem;
using namespace predset;

namespace {

struct Overrides {
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string profile;
};

ParsedConfig resolve(const std::string& config_path, const Overrides& o) {
  ParsedConfig pc = config_path.empty() ? ParsedConfig{} : load_config(config_path);
  if (!o.profile.empty()) apply_profile(pc.experiment, o.profile);
  if (o.runs) pc.experiment.runs = *o.runs;
  if (o.seed) pc.experiment.master_seed = *o.seed;
  if (o.threads) pc.experiment.threads = *o.threads;
  pc.experiment.validate();
  return pc;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--runs", o.runs, "Number of repetitions");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--profile", o.profile, "Size profile")->check(CLI::IsMember({"desk", "full"}));
}

std::vector<GridCell> run_cells(const ParsedConfig& pc) {
  if (!pc.grid.empty()) return run_grid(pc.experiment, pc.grid);
  return {GridCell{pc.experiment.gamma, pc.experiment.target_accuracy, run_experiment(pc.experiment)}};
}

void print_cells(const std::vector<GridCell>& cells) {
  for (const auto& c : cells) {
    std::printf("gamma=%.2f target=%.2f classifier=%.3f [%s]\n", c.gamma, c.target_accuracy,
                c.result.classifier_accuracy, c.result.config_hash.c_str());
    for (const auto& [m, s] : c.result.summary) {
      std::printf("  %-12s %.4f +- %.4f  size %.2f\n", std::string(to_string(m)).c_str(), s.mean,
                  s.stddev, s.mean_set_size);
    }
  }
}

int cmd_run(const std::string& config, const Overrides& o, const fs::path& out, bool sweep_only) {
  const auto pc = resolve(config, o);
  // Everything is computed before the first file is written.
  const auto cells = run_cells(pc);
  fs::create_directories(out);
  write_sweep(out / "sweep.csv", cells);
  if (sweep_only) return 0;
  std::vector<ResultRecord> records;
  std::vector<InstanceResult> instances;
  for (const auto& c : cells) {
    records.insert(records.end(), c.result.records.begin(), c.result.records.end());
    instances.insert(instances.end(), c.result.instances.begin(), c.result.instances.end());
  }
  write_results(out / "results.csv", records);
  write_instances(out / "instances.csv", instances);
  write_table(out / "table1.csv", cells);
  write_pairs(out / "fig2_pairs.csv", instances);
  write_ccdf(out / "fig3_ccdf.csv", instances);
  print_cells(cells);
  return 0;
}

int cmd_report(const fs::path& in, const fs::path& out) {
  const auto records = read_results(in / "results.csv");
  const auto instances = read_instances(in / "instances.csv");
  fs::create_directories(out);
  write_table(out / "table1.csv", records);
  write_pairs(out / "fig2_pairs.csv", instances);
  write_ccdf(out / "fig3_ccdf.csv", instances);
  return 0;
}

int cmd_gen(const std::string& config, const Overrides& o, const fs::path& out) {
  const auto cfg = resolve(config, o).experiment;
  if (cfg.task_source != TaskSource::Generate) {
    throw Error(ErrorCode::ConfigError, "gen needs task.source = generate");
  }
  const RngStream task_rng(cfg.master_seed, "gen/task");
  const RngStream split_rng(cfg.master_seed, "gen/split");
  TaskConfig tc = cfg.task;
  tc.class_sep = cfg.class_sep ? *cfg.class_sep
                               : tune_class_sep(tc, task_rng, split_rng, cfg.target_accuracy, cfg.train,
                                                cfg.separation_tolerance)
                                     .class_sep;
  const auto task = gen_task(tc, task_rng);
  RngStream srng = split_rng;
  const auto idx = split_indices(task.data.size(), {tc.train, tc.calib, tc.test}, srng);
  const auto model = train_softmax(task.data.subset(idx.train_a), cfg.train);

  RngStream erng(cfg.master_seed, "gen/expert");
  const auto calib = task.data.subset(idx.calib);
  const auto expert = simulate_noisy_expert(task.data.subset(idx.train_b), calib, cfg.gamma, erng, cfg.train,
                                            cfg.smoothing);
  const auto test_noised = noise_feature(task.data.subset(idx.test), cfg.gamma, erng);

  Dataset ds;
  ds.label_count = tc.label_count;
  auto add = [&](std::size_t i, LabelId human) {
    InstanceRecord r;
    r.id = "x" + std::to_string(i);
    r.scores = predict_proba(model, task.data.x.row(i));
    r.true_label = task.data.y[i];
    r.human_pred = human;
    r.noise_tag = cfg.gamma;
    ds.records.push_back(std::move(r));
  };
  for (std::size_t k = 0; k < idx.calib.size(); ++k) add(idx.calib[k], expert.calib_predictions[k]);
  for (std::size_t k = 0; k < idx.test.size(); ++k) {
    add(idx.test[k], predict_label(expert.model, test_noised.x.row(k)));
  }
  fs::create_directories(out);
  save_scored_dataset(out / "dataset.csv", ds);
  save_confusion(out / "confusion.csv", expert.confusion);
  std::printf("class_sep=%.6f records=%zu\n", tc.class_sep, ds.records.size());
  return 0;
}

int cmd_reduce(const fs::path& graph_path, const fs::path& out) {
  const Graph g = load_graph(graph_path);
  const auto inst = clique_to_instance(g);
  fs::create_directories(out);
  save_prob_vector(out / "p_true.csv", inst.p_true);
  save_confusion(out / "confusion.csv", inst.confusion);
  const auto greedy = greedy_set(inst.p_true, inst.confusion);
  std::printf("vertices=%zu edges=%zu greedy=%s value=%.12g\n", g.size(), g.edge_count(),
              greedy.set.to_display().c_str(), greedy.value);
  if (g.size() <= kDefaultCliqueCap) {
    const auto best = brute_force_set(inst.p_true, inst.confusion);
    const auto clique = max_clique_bruteforce(g);
    std::printf("brute_force=%s value=%.12g clique=%zu witness=%s\n", best.set.to_display().c_str(),
                best.value, clique.size, clique.witness.to_display().c_str());
  }
  return 0;
}

int cmd_verify(std::uint64_t seed, std::size_t instances, std::size_t graphs) {
  const SuiteReport reports[] = {
      prefix_dominance_suite(instances, 12, seed),
      incremental_suite(instances * 20, 12, seed),
      evaluation_count_suite(15),
      reduction_suite(graphs, 4, 10, seed),
  };
  bool ok = true;
  for (const auto& r : reports) {
    std::printf("%s %s: %zu cases, %zu violations%s%s\n", r.passed() ? "PASS" : "FAIL", r.name.c_str(),
                r.cases, r.violations, r.passed() ? "" : "; first: ", r.first_violation.c_str());
    ok = ok && r.passed();
  }
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prediction sets that maximize the accuracy of a simulated expert"};
  app.require_subcommand(1);

  std::string config;
  fs::path out = "out";
  Overrides o;

  auto* gen = app.add_subcommand("gen", "Synthesize a task and export scores, expert predictions and confusion");
  gen->add_option("-c,--config", config, "Config file");
  gen->add_option("-o,--out", out, "Output directory");
  add_overrides(gen, o);

  auto* run = app.add_subcommand("run", "Run an experiment (or its grid) and write all result files");
  run->add_option("-c,--config", config, "Config file")->required();
  run->add_option("-o,--out", out, "Output directory");
  add_overrides(run, o);

  auto* sweep = app.add_subcommand("sweep", "Conformal accuracy for every alpha of the grid");
  sweep->add_option("-c,--config", config, "Config file")->required();
  sweep->add_option("-o,--out", out, "Output directory");
  add_overrides(sweep, o);

  fs::path graph_path;
  auto* reduce = app.add_subcommand("reduce", "Turn a graph into an expert-accuracy instance");
  reduce->add_option("-g,--graph", graph_path, "Graph file")->required();
  reduce->add_option("-o,--out", out, "Output directory");

  std::uint64_t verify_seed = 1;
  std::size_t verify_instances = 500;
  std::size_t verify_graphs = 100;
  auto* verify = app.add_subcommand("verify", "Randomized optimizer and hardness checks");
  verify->add_option("--seed", verify_seed, "Seed");
  verify->add_option("--instances", verify_instances, "Random objective instances");
  verify->add_option("--graphs", verify_graphs, "Random graphs");

  fs::path in;
  auto* report = app.add_subcommand("report", "Rebuild table and figure CSVs from a run directory");
  report->add_option("-i,--in", in, "Run directory holding results.csv and instances.csv")->required();
  report->add_option("-o,--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen(config, o, out);
    if (*run) return cmd_run(config, o, out, false);
    if (*sweep) return cmd_run(config, o, out, true);
    if (*reduce) return cmd_reduce(graph_path, out);
    if (*verify) return cmd_verify(verify_seed, verify_instances, verify_graphs);
    if (*report) return cmd_report(in, out.empty() ? in : out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::ConfigError) return 2;
    if (e.code() == ErrorCode::AuditFailure) return 3;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
