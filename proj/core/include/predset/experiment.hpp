#pragma once

// Pipeline orchestration: per run, split the data, train or load the
// classifier scores, calibrate, obtain the expert confusion matrix, build
// prediction sets per method and score the simulated expert on the test split.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "predset/calibration.hpp"
#include "predset/conformal.hpp"
#include "predset/core.hpp"
#include "predset/ingest.hpp"
#include "predset/simgen.hpp"

namespace predset {

enum class Method { Greedy, BruteForce, NaiveCp, ApsCp, None };
std::string_view to_string(Method m);
Method parse_method(std::string_view text);

enum class TaskSource { Generate, Load };
enum class ExpertSource { GammaProtocol, ConfusionFile, HumanPredictions };
enum class EvaluationMode { Analytic, MonteCarlo };

struct CalibrationSpec {
  bool enabled = true;
  std::size_t k = kDefaultTopK;
  std::size_t bins = kDefaultCalibrationBins;
};

std::vector<double> default_alpha_grid();

struct ExperimentConfig {
  TaskSource task_source = TaskSource::Generate;
  std::filesystem::path dataset_path;
  std::optional<double> noise_group;  // loaded data: keep rows with this noise_tag
  TaskConfig task{.train = 4000, .calib = 500, .test = 500};
  std::optional<double> class_sep;  // unset: tuned to target_accuracy
  double target_accuracy = 0.7;
  double separation_tolerance = kSeparationTolerance;

  ExpertSource expert_source = ExpertSource::GammaProtocol;
  double gamma = 0.7;
  std::filesystem::path confusion_path;
  double smoothing = 0.0;

  std::vector<Method> methods{Method::Greedy, Method::NaiveCp, Method::ApsCp, Method::None};
  std::vector<double> alpha_grid = default_alpha_grid();
  CalibrationSpec calibration;
  TrainOptions train;
  std::size_t brute_force_limit = 20;

  std::size_t runs = 5;
  std::uint64_t master_seed = 1;
  EvaluationMode mode = EvaluationMode::Analytic;
  std::size_t monte_carlo_draws = 1;
  std::size_t threads = 1;

  void validate() const;
  bool has(Method m) const;
  // Stable textual form of every field that influences results (threads
  // excluded); config_hash() is its FNV-1a digest in hex.
  std::string canonical() const;
  std::string config_hash() const;
};

struct GridSpec {
  std::vector<double> gammas;
  std::vector<double> targets;
  bool empty() const noexcept { return gammas.empty() || targets.empty(); }
};

// Desk profile: 4000/500/500 samples, 5 runs. Full profile: 16000/1000/1000, 10 runs.
void apply_profile(ExperimentConfig& cfg, std::string_view profile);

struct ParsedConfig {
  ExperimentConfig experiment;
  GridSpec grid;
};
// INI-style `key = value` file with [sections]; throws ConfigError.
ParsedConfig parse_config_text(std::string_view text,
                               const std::filesystem::path& base_dir = {});
ParsedConfig load_config(const std::filesystem::path& path);

struct MethodSummary {
  double mean = 0.0;
  double stddev = 0.0;  // across runs (sample standard deviation)
  double mean_set_size = 0.0;
  double coverage = 0.0;
  std::vector<double> per_run;
};

struct SweepPoint {
  ScoreKind kind = ScoreKind::Naive;
  double alpha = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double mean_set_size = 0.0;
  bool best = false;
};

struct ExperimentResult {
  std::string config_hash;
  double gamma = 0.0;
  double target_accuracy = 0.0;
  double classifier_accuracy = 0.0;  // mean over runs, raw scores on the test split
  double class_sep = 0.0;            // mean over runs
  std::map<Method, MethodSummary> summary;
  std::map<ScoreKind, double> best_alpha;
  std::vector<SweepPoint> sweep;
  std::vector<ResultRecord> records;
  std::vector<InstanceResult> instances;
  // Per test instance ghat(greedy) / ghat(brute force), only with both methods.
  std::vector<double> greedy_brute_ratios;
  std::size_t uniform_fallbacks = 0;
  std::size_t audited_sets = 0;
};

// Throws Error(AuditFailure) if some greedy set scores below a conformal set
// on the shared estimate.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Same as run_experiment, but keeps the sweep curve as the main product.
std::vector<SweepPoint> alpha_sweep(const ExperimentConfig& cfg);

struct GridCell {
  double gamma = 0.0;
  double target_accuracy = 0.0;
  ExperimentResult result;
};

// Runs every (gamma, target) cell; the classifier side of each target is
// built once and shared across gammas. Cell results equal what
// run_experiment produces for the same cell config.
std::vector<GridCell> run_grid(const ExperimentConfig& base, const GridSpec& grid);

struct PairInclusion {
  std::string method;
  LabelId label = 0;
  std::size_t count = 0;            // test instances with this true label
  double pair_probability = 0.0;    // P({y, confuser} in set | Y = y)
  double mean_set_size = 0.0;
};

// Instances must carry the confuser of their true label.
std::vector<PairInclusion> pair_inclusion_stats(const std::vector<InstanceResult>& instances);

struct CcdfPoint {
  double threshold = 0.0;
  double fraction = 0.0;  // share of instances with accuracy >= threshold
};

// Thresholds 0, 0.05, ..., 1.
std::vector<CcdfPoint> ccdf(const std::vector<double>& accuracies);

// Summary CSV writers shared by the CLI and the acceptance suite.
void write_table(const std::filesystem::path& path, const std::vector<GridCell>& cells);
// Same table rebuilt from long-format result records.
void write_table(const std::filesystem::path& path, const std::vector<ResultRecord>& records);
void write_sweep(const std::filesystem::path& path, const std::vector<GridCell>& cells);
void write_pairs(const std::filesystem::path& path, const std::vector<InstanceResult>& instances);
void write_ccdf(const std::filesystem::path& path, const std::vector<InstanceResult>& instances);

}  // namespace predset
