#include "predset/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "predset/calibration.hpp"
#include "predset/objective.hpp"
#include "predset/optimizer.hpp"

namespace predset {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Greedy: return "greedy";
    case Method::BruteForce: return "brute_force";
    case Method::NaiveCp: return "naive_cp";
    case Method::ApsCp: return "aps_cp";
    case Method::None: return "none";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::Greedy, Method::BruteForce, Method::NaiveCp, Method::ApsCp, Method::None}) {
    if (text == to_string(m)) return m;
  }
  throw Error(ErrorCode::ConfigError, "unknown method '" + std::string(text) + "'");
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);
  return grid;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
  if (methods.empty()) fail("at least one method is required");
  if (runs == 0) fail("runs must be at least 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0,1]");
  if (!(smoothing >= 0.0)) fail("smoothing must be nonnegative");
  for (double a : alpha_grid) {
    if (!(a >= 0.0 && a <= 1.0)) fail("alpha grid values must lie in [0,1]");
  }
  if ((has(Method::NaiveCp) || has(Method::ApsCp)) && alpha_grid.empty()) fail("empty alpha grid");
  if (mode == EvaluationMode::MonteCarlo && monte_carlo_draws == 0) fail("draws must be positive");
  if (calibration.enabled && (calibration.k == 0 || calibration.bins == 0)) {
    fail("calibration k and bins must be positive");
  }
  if (task_source == TaskSource::Generate) {
    if (expert_source == ExpertSource::HumanPredictions) {
      fail("human predictions need a loaded dataset");
    }
    try {
      TaskConfig t = task;
      t.class_sep = class_sep.value_or(1.0);
      t.validate();
    } catch (const Error& e) {
      fail(e.what());
    }
    if (calibration.enabled && calibration.k > task.label_count) fail("calibration k exceeds L");
    if (!class_sep && !(target_accuracy > 0.0 && target_accuracy < 1.0)) {
      fail("target_accuracy must lie in (0,1)");
    }
  } else if (dataset_path.empty()) {
    fail("task.path is required when task.source = load");
  }
  if (expert_source == ExpertSource::ConfusionFile && confusion_path.empty()) {
    fail("expert.confusion_path is required when expert.source = confusion");
  }
}

bool ExperimentConfig::has(Method m) const {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream s;
  s << "source=" << (task_source == TaskSource::Generate ? "generate" : "load");
  if (task_source == TaskSource::Load) {
    s << ";path=" << dataset_path.filename().string();
    if (noise_group) s << ";noise_group=" << format_double(*noise_group);
  } else {
    s << ";labels=" << task.label_count << ";features=" << task.d_total
      << ";informative=" << task.d_informative;
    if (class_sep) {
      s << ";class_sep=" << format_double(*class_sep);
    } else {
      s << ";target=" << format_double(target_accuracy)
        << ";sep_tol=" << format_double(separation_tolerance);
    }
    s << ";epochs=" << train.epochs << ";lr=" << format_double(train.learning_rate)
      << ";l2=" << format_double(train.l2);
  }
  s << ";train=" << task.train << ";calib=" << task.calib << ";test=" << task.test;
  s << ";expert=" << static_cast<int>(expert_source);
  if (expert_source == ExpertSource::GammaProtocol) s << ";gamma=" << format_double(gamma);
  if (expert_source == ExpertSource::ConfusionFile) s << ";confusion=" << confusion_path.filename().string();
  s << ";smoothing=" << format_double(smoothing);
  s << ";methods=";
  for (Method m : methods) s << to_string(m) << ',';
  s << ";alphas=";
  for (double a : alpha_grid) s << format_double(a) << ',';
  s << ";calibration=" << (calibration.enabled ? "topk" : "none");
  if (calibration.enabled) s << ',' << calibration.k << ',' << calibration.bins;
  s << ";brute_limit=" << brute_force_limit << ";runs=" << runs << ";seed=" << master_seed
    << ";mode=" << (mode == EvaluationMode::Analytic ? "analytic" : "monte_carlo");
  if (mode == EvaluationMode::MonteCarlo) s << ";draws=" << monte_carlo_draws;
  return s.str();
}

std::string ExperimentConfig::config_hash() const {
  static constexpr char kHex[] = "0123456789abcdef";
  std::uint64_t h = fnv1a64(canonical());
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

void apply_profile(ExperimentConfig& cfg, std::string_view profile) {
  if (profile == "desk") {
    cfg.task.train = 4000;
    cfg.task.calib = 500;
    cfg.task.test = 500;
    cfg.runs = 5;
  } else if (profile == "full") {
    cfg.task.train = 16000;
    cfg.task.calib = 1000;
    cfg.task.test = 1000;
    cfg.runs = 10;
  } else {
    throw Error(ErrorCode::ConfigError, "unknown profile '" + std::string(profile) + "'");
  }
}

namespace {

double config_double(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const Error&) {
    throw Error(ErrorCode::ConfigError, key + ": expected a number, got '" + v + "'");
  }
}

std::size_t config_size(const std::string& key, const std::string& v) {
  try {
    return parse_size(v);
  } catch (const Error&) {
    throw Error(ErrorCode::ConfigError, key + ": expected a nonnegative integer, got '" + v + "'");
  }
}

std::vector<std::string> config_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> config_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : config_list(v)) out.push_back(config_double(key, s));
  return out;
}

// "start:stop:step" or a comma list.
std::vector<double> config_alpha_grid(const std::string& key, const std::string& v) {
  if (v.find(':') == std::string::npos) return config_doubles(key, v);
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ':')) parts.push_back(item);
  if (parts.size() != 3) throw Error(ErrorCode::ConfigError, key + ": expected start:stop:step");
  const double start = config_double(key, parts[0]);
  const double stop = config_double(key, parts[1]);
  const double step = config_double(key, parts[2]);
  if (!(step > 0.0) || stop < start) throw Error(ErrorCode::ConfigError, key + ": bad range");
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  return out;
}

std::filesystem::path config_path(const std::string& v, const std::filesystem::path& base) {
  std::filesystem::path p(v);
  return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

ParsedConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  ParsedConfig out;
  auto& cfg = out.experiment;

  // The profile sets sizes first so explicit keys can override them.
  if (auto run = tree.get_child_optional("run")) {
    if (auto p = run->get_optional<std::string>("profile")) apply_profile(cfg, *p);
  }

  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) {
      throw Error(ErrorCode::ConfigError, "key '" + section + "' outside any section");
    }
    for (const auto& [name, node] : body) {
      const std::string key = section + "." + name;
      const std::string v = node.data();
      auto unknown = [&] { throw Error(ErrorCode::ConfigError, "unknown key '" + key + "'"); };
      if (section == "task") {
        if (name == "source") {
          if (v == "generate") cfg.task_source = TaskSource::Generate;
          else if (v == "load") cfg.task_source = TaskSource::Load;
          else throw Error(ErrorCode::ConfigError, key + ": expected generate or load");
        } else if (name == "path") {
          cfg.dataset_path = config_path(v, base_dir);
        } else if (name == "labels") {
          cfg.task.label_count = config_size(key, v);
        } else if (name == "features") {
          cfg.task.d_total = config_size(key, v);
        } else if (name == "informative") {
          cfg.task.d_informative = config_size(key, v);
        } else if (name == "class_sep") {
          if (v == "auto") cfg.class_sep.reset();
          else cfg.class_sep = config_double(key, v);
        } else if (name == "target_accuracy") {
          cfg.target_accuracy = config_double(key, v);
        } else if (name == "separation_tolerance") {
          cfg.separation_tolerance = config_double(key, v);
        } else if (name == "train") {
          cfg.task.train = config_size(key, v);
        } else if (name == "calib") {
          cfg.task.calib = config_size(key, v);
        } else if (name == "test") {
          cfg.task.test = config_size(key, v);
        } else if (name == "noise_group") {
          cfg.noise_group = config_double(key, v);
        } else {
          unknown();
        }
      } else if (section == "expert") {
        if (name == "source") {
          if (v == "gamma") cfg.expert_source = ExpertSource::GammaProtocol;
          else if (v == "confusion") cfg.expert_source = ExpertSource::ConfusionFile;
          else if (v == "human") cfg.expert_source = ExpertSource::HumanPredictions;
          else throw Error(ErrorCode::ConfigError, key + ": expected gamma, confusion or human");
        } else if (name == "gamma") {
          cfg.gamma = config_double(key, v);
        } else if (name == "confusion_path") {
          cfg.confusion_path = config_path(v, base_dir);
        } else if (name == "smoothing") {
          cfg.smoothing = config_double(key, v);
        } else {
          unknown();
        }
      } else if (section == "methods") {
        if (name == "list") {
          cfg.methods.clear();
          for (const auto& m : config_list(v)) {
            const Method parsed = parse_method(m);
            if (!cfg.has(parsed)) cfg.methods.push_back(parsed);
          }
        } else if (name == "brute_force_limit") {
          cfg.brute_force_limit = config_size(key, v);
        } else {
          unknown();
        }
      } else if (section == "conformal") {
        if (name == "alpha_grid") cfg.alpha_grid = config_alpha_grid(key, v);
        else unknown();
      } else if (section == "calibration") {
        if (name == "mode") {
          if (v == "topk") cfg.calibration.enabled = true;
          else if (v == "none") cfg.calibration.enabled = false;
          else throw Error(ErrorCode::ConfigError, key + ": expected topk or none");
        } else if (name == "k") {
          cfg.calibration.k = config_size(key, v);
        } else if (name == "bins") {
          cfg.calibration.bins = config_size(key, v);
        } else {
          unknown();
        }
      } else if (section == "train") {
        if (name == "epochs") cfg.train.epochs = config_size(key, v);
        else if (name == "learning_rate") cfg.train.learning_rate = config_double(key, v);
        else if (name == "l2") cfg.train.l2 = config_double(key, v);
        else unknown();
      } else if (section == "run") {
        if (name == "profile") {
          // applied above
        } else if (name == "runs") {
          cfg.runs = config_size(key, v);
        } else if (name == "seed") {
          cfg.master_seed = config_size(key, v);
        } else if (name == "mode") {
          if (v == "analytic") cfg.mode = EvaluationMode::Analytic;
          else if (v == "monte_carlo") cfg.mode = EvaluationMode::MonteCarlo;
          else throw Error(ErrorCode::ConfigError, key + ": expected analytic or monte_carlo");
        } else if (name == "draws") {
          cfg.monte_carlo_draws = config_size(key, v);
        } else if (name == "threads") {
          cfg.threads = config_size(key, v);
        } else {
          unknown();
        }
      } else if (section == "grid") {
        if (name == "gammas") out.grid.gammas = config_doubles(key, v);
        else if (name == "targets") out.grid.targets = config_doubles(key, v);
        else unknown();
      } else {
        throw Error(ErrorCode::ConfigError, "unknown section [" + section + "]");
      }
    }
  }
  cfg.validate();
  for (double g : out.grid.gammas) {
    if (!(g >= 0.0 && g <= 1.0)) throw Error(ErrorCode::ConfigError, "grid gammas must lie in [0,1]");
  }
  for (double t : out.grid.targets) {
    if (!(t > 0.0 && t < 1.0)) throw Error(ErrorCode::ConfigError, "grid targets must lie in (0,1)");
  }
  return out;
}

ParsedConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return parse_config_text(text, path.parent_path());
}

namespace {

template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string run_key(std::size_t run) { return "run/" + std::to_string(run); }

// Everything about a run that does not depend on the expert.
struct TaskStage {
  std::vector<std::string> test_ids;
  std::vector<ProbVector> calib_f;  // calibrated when calibration is enabled
  std::vector<ProbVector> test_f;
  std::vector<LabelId> calib_y;
  std::vector<LabelId> test_y;
  std::vector<std::optional<LabelId>> calib_human;
  double classifier_accuracy = 0.0;
  double class_sep = 0.0;
  LabeledData train_b;  // generated tasks only
  LabeledData calib_data;
};

double argmax_accuracy(const std::vector<ProbVector>& f, const std::vector<LabelId>& y) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < f.size(); ++i) hits += rank_labels(f[i]).front() == y[i] ? 1 : 0;
  return f.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(f.size());
}

void calibrate_stage(const ExperimentConfig& cfg, TaskStage& st) {
  if (!cfg.calibration.enabled) return;
  const auto cal = fit_topk(st.calib_f, st.calib_y, cfg.calibration.k, cfg.calibration.bins);
  for (auto& f : st.calib_f) f = apply_topk(cal, f);
  for (auto& f : st.test_f) f = apply_topk(cal, f);
}

TaskStage build_generated_stage(const ExperimentConfig& cfg, std::size_t run) {
  const RngStream task_rng(cfg.master_seed, run_key(run) + "/task");
  const RngStream split_rng(cfg.master_seed, run_key(run) + "/split");
  TaskStage st;
  st.class_sep = cfg.class_sep ? *cfg.class_sep
                               : tune_class_sep(cfg.task, task_rng, split_rng, cfg.target_accuracy,
                                                cfg.train, cfg.separation_tolerance)
                                     .class_sep;
  TaskConfig tc = cfg.task;
  tc.class_sep = st.class_sep;
  const auto task = gen_task(tc, task_rng);
  RngStream srng = split_rng;
  const auto idx = split_indices(task.data.size(), {tc.train, tc.calib, tc.test}, srng);
  const auto model = train_softmax(task.data.subset(idx.train_a), cfg.train);
  st.train_b = task.data.subset(idx.train_b);
  st.calib_data = task.data.subset(idx.calib);
  for (std::size_t i : idx.calib) {
    st.calib_f.push_back(predict_proba(model, task.data.x.row(i)));
    st.calib_y.push_back(task.data.y[i]);
  }
  for (std::size_t i : idx.test) {
    st.test_ids.push_back("x" + std::to_string(i));
    st.test_f.push_back(predict_proba(model, task.data.x.row(i)));
    st.test_y.push_back(task.data.y[i]);
  }
  st.classifier_accuracy = argmax_accuracy(st.test_f, st.test_y);
  calibrate_stage(cfg, st);
  return st;
}

Dataset filtered_dataset(const ExperimentConfig& cfg) {
  auto ds = load_scored_dataset(cfg.dataset_path);
  if (cfg.noise_group) {
    std::erase_if(ds.records, [&](const InstanceRecord& r) {
      return !r.noise_tag || *r.noise_tag != *cfg.noise_group;
    });
  }
  return ds;
}

TaskStage build_loaded_stage(const ExperimentConfig& cfg, const Dataset& ds, std::size_t run) {
  const std::size_t n = ds.records.size();
  const std::size_t calib = cfg.task.calib;
  const std::size_t test = cfg.task.test == 0 ? n - std::min(n, calib) : cfg.task.test;
  const bool needs_calib = cfg.calibration.enabled || cfg.has(Method::NaiveCp) || cfg.has(Method::ApsCp) ||
                           cfg.expert_source == ExpertSource::HumanPredictions;
  if ((needs_calib && calib == 0) || test == 0 || calib + test > n) {
    throw Error(ErrorCode::ConfigError, "calib/test sizes " + std::to_string(calib) + "/" +
                                            std::to_string(test) + " do not fit " +
                                            std::to_string(n) + " records");
  }
  RngStream srng(cfg.master_seed, run_key(run) + "/split");
  const auto idx = split_indices(n, {n - calib - test, calib, test}, srng);
  TaskStage st;
  for (std::size_t i : idx.calib) {
    st.calib_f.push_back(ds.records[i].scores);
    st.calib_y.push_back(ds.records[i].true_label);
    st.calib_human.push_back(ds.records[i].human_pred);
  }
  for (std::size_t i : idx.test) {
    st.test_ids.push_back(ds.records[i].id);
    st.test_f.push_back(ds.records[i].scores);
    st.test_y.push_back(ds.records[i].true_label);
  }
  st.classifier_accuracy = argmax_accuracy(st.test_f, st.test_y);
  calibrate_stage(cfg, st);
  return st;
}

std::vector<TaskStage> build_stages(const ExperimentConfig& cfg) {
  std::vector<TaskStage> stages(cfg.runs);
  if (cfg.task_source == TaskSource::Generate) {
    parallel_for(cfg.runs, cfg.threads, [&](std::size_t r) { stages[r] = build_generated_stage(cfg, r); });
  } else {
    const auto ds = filtered_dataset(cfg);
    if (ds.records.empty()) throw Error(ErrorCode::ConfigError, "no records left after filtering");
    parallel_for(cfg.runs, cfg.threads, [&](std::size_t r) { stages[r] = build_loaded_stage(cfg, ds, r); });
  }
  return stages;
}

ConfusionMatrix expert_confusion(const ExperimentConfig& cfg, const TaskStage& st, std::size_t run,
                                 const std::optional<ConfusionMatrix>& loaded) {
  switch (cfg.expert_source) {
    case ExpertSource::GammaProtocol: {
      RngStream rng(cfg.master_seed, run_key(run) + "/expert");
      return gen_expert_confusion(st.train_b, st.calib_data, cfg.gamma, rng, cfg.train, cfg.smoothing);
    }
    case ExpertSource::ConfusionFile:
      return *loaded;
    case ExpertSource::HumanPredictions: {
      const std::size_t l = st.calib_f.front().size();
      std::vector<std::vector<std::uint64_t>> counts(l, std::vector<std::uint64_t>(l, 0));
      std::size_t seen = 0;
      for (std::size_t i = 0; i < st.calib_y.size(); ++i) {
        if (!st.calib_human[i]) continue;
        ++counts[*st.calib_human[i]][st.calib_y[i]];
        ++seen;
      }
      if (seen == 0) {
        throw Error(ErrorCode::ConfigError, "calibration split carries no human predictions");
      }
      return normalize_counts(counts, cfg.smoothing);
    }
  }
  throw Error(ErrorCode::ConfigError, "unknown expert source");
}

// Most frequent mistake for each true label; ties go to the smaller index.
std::vector<LabelId> confusers(const ConfusionMatrix& c) {
  std::vector<LabelId> out(c.size(), 0);
  for (LabelId y = 0; y < c.size(); ++y) {
    double best = -1.0;
    for (LabelId other = 0; other < c.size(); ++other) {
      if (other != y && c.at(other, y) > best) {
        best = c.at(other, y);
        out[y] = other;
      }
    }
  }
  return out;
}

struct Scorer {
  const ExperimentConfig& cfg;
  const ConfusionMatrix& confusion;
  std::size_t run;
  std::size_t fallbacks = 0;

  double operator()(const PredictionSet& set, LabelId truth, std::string_view stream,
                    std::size_t instance) {
    const auto dist = mnl_choice_distribution(set, truth, confusion);
    if (dist.uniform_fallback) ++fallbacks;
    if (cfg.mode == EvaluationMode::Analytic) return dist.probability_of(truth);
    RngStream rng(cfg.master_seed,
                  run_key(run) + "/mc/" + std::string(stream) + "/" + std::to_string(instance));
    std::size_t hits = 0;
    for (std::size_t d = 0; d < cfg.monte_carlo_draws; ++d) {
      hits += sample_expert_prediction(set, truth, confusion, rng) == truth ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(cfg.monte_carlo_draws);
  }
};

struct MethodRun {
  std::vector<PredictionSet> sets;
  std::vector<double> accuracy;
  std::vector<double> objective;  // ghat under the shared f and C
};

struct ConformalRun {
  std::vector<ConformalThreshold> thresholds;  // one per alpha
  std::vector<double> mean_accuracy;           // one per alpha
  std::vector<double> mean_set_size;
};

struct RunEval {
  ConfusionMatrix confusion;
  std::vector<LabelId> confuser;
  std::map<Method, MethodRun> methods;
  std::map<ScoreKind, ConformalRun> conformal;
  std::vector<double> greedy_value;
  std::vector<double> ratios;
  std::size_t fallbacks = 0;
  std::size_t audited = 0;
};

Method method_of(ScoreKind k) { return k == ScoreKind::Naive ? Method::NaiveCp : Method::ApsCp; }

RunEval evaluate_run(const ExperimentConfig& cfg, const TaskStage& st, std::size_t run,
                     const std::optional<ConfusionMatrix>& loaded) {
  RunEval ev;
  ev.confusion = expert_confusion(cfg, st, run, loaded);
  ev.confuser = confusers(ev.confusion);
  const auto& c = ev.confusion;
  const std::size_t n = st.test_f.size();
  Scorer score{cfg, c, run};

  if (cfg.has(Method::Greedy)) {
    auto& mr = ev.methods[Method::Greedy];
    ev.greedy_value.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto g = greedy_set(st.test_f[i], c);
      ev.greedy_value[i] = g.value;
      mr.objective.push_back(g.value);
      mr.accuracy.push_back(score(g.set, st.test_y[i], "greedy", i));
      mr.sets.push_back(std::move(g.set));
    }
  }
  if (cfg.has(Method::BruteForce)) {
    auto& mr = ev.methods[Method::BruteForce];
    for (std::size_t i = 0; i < n; ++i) {
      auto b = brute_force_set(st.test_f[i], c, cfg.brute_force_limit);
      if (cfg.has(Method::Greedy)) {
        ev.ratios.push_back(b.value > 0.0 ? ev.greedy_value[i] / b.value : 1.0);
      }
      mr.objective.push_back(b.value);
      mr.accuracy.push_back(score(b.set, st.test_y[i], "brute_force", i));
      mr.sets.push_back(std::move(b.set));
    }
  }
  if (cfg.has(Method::None)) {
    auto& mr = ev.methods[Method::None];
    const auto full = PredictionSet::full(c.size());
    for (std::size_t i = 0; i < n; ++i) {
      mr.objective.push_back(expected_accuracy(full, st.test_f[i], c));
      mr.accuracy.push_back(score(full, st.test_y[i], "none", i));
      mr.sets.push_back(full);
    }
  }
  for (ScoreKind kind : {ScoreKind::Naive, ScoreKind::Aps}) {
    if (!cfg.has(method_of(kind))) continue;
    std::vector<double> calib_scores(st.calib_f.size());
    for (std::size_t i = 0; i < calib_scores.size(); ++i) {
      calib_scores[i] = nonconformity(st.calib_f[i], st.calib_y[i], kind);
    }
    auto& cr = ev.conformal[kind];
    for (std::size_t a = 0; a < cfg.alpha_grid.size(); ++a) {
      const auto t = calibration_quantile(calib_scores, cfg.alpha_grid[a]);
      double acc = 0.0;
      double size = 0.0;
      const std::string stream = std::string(to_string(kind)) + "/" + std::to_string(a);
      for (std::size_t i = 0; i < n; ++i) {
        const auto set = conformal_set(st.test_f[i], t, kind);
        if (cfg.has(Method::Greedy)) {
          const double cp_value = expected_accuracy(set, st.test_f[i], c);
          ++ev.audited;
          if (ev.greedy_value[i] + 1e-12 < cp_value) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "greedy below conformal: run " << run << " instance " << st.test_ids[i]
                << " score " << to_string(kind) << " alpha " << cfg.alpha_grid[a] << " greedy "
                << ev.greedy_value[i] << " conformal " << cp_value << " set " << set.to_display();
            throw Error(ErrorCode::AuditFailure, msg.str());
          }
        }
        acc += score(set, st.test_y[i], stream, i);
        size += static_cast<double>(set.size());
      }
      cr.thresholds.push_back(t);
      cr.mean_accuracy.push_back(acc / static_cast<double>(n));
      cr.mean_set_size.push_back(size / static_cast<double>(n));
    }
  }
  ev.fallbacks = score.fallbacks;
  return ev;
}

ExperimentResult finalize(const ExperimentConfig& cfg, const std::vector<TaskStage>& stages,
                          std::vector<RunEval>& evals) {
  ExperimentResult res;
  res.config_hash = cfg.config_hash();
  res.gamma = cfg.gamma;
  res.target_accuracy = cfg.target_accuracy;
  const std::size_t runs = stages.size();
  std::vector<double> clf, seps;
  for (std::size_t r = 0; r < runs; ++r) {
    clf.push_back(stages[r].classifier_accuracy);
    seps.push_back(stages[r].class_sep);
    res.records.push_back({"config", res.config_hash, r, "classifier_accuracy", stages[r].classifier_accuracy});
    res.records.push_back({"config", res.config_hash, r, "class_sep", stages[r].class_sep});
    res.records.push_back({"config", res.config_hash, r, "gamma", cfg.gamma});
    res.records.push_back({"config", res.config_hash, r, "target_accuracy", cfg.target_accuracy});
    res.records.push_back({"expert", res.config_hash, r, "uniform_fallbacks",
                           static_cast<double>(evals[r].fallbacks)});
    res.uniform_fallbacks += evals[r].fallbacks;
    res.audited_sets += evals[r].audited;
  }
  res.classifier_accuracy = mean_of(clf);
  res.class_sep = mean_of(seps);

  // Conformal: pick the alpha with the best test accuracy averaged over runs,
  // then materialize that alpha's sets.
  for (auto& [kind, unused] : evals.front().conformal) {
    (void)unused;
    const std::size_t na = cfg.alpha_grid.size();
    std::vector<double> means(na), sds(na), sizes(na);
    for (std::size_t a = 0; a < na; ++a) {
      std::vector<double> per_run, per_run_size;
      for (auto& ev : evals) {
        per_run.push_back(ev.conformal.at(kind).mean_accuracy[a]);
        per_run_size.push_back(ev.conformal.at(kind).mean_set_size[a]);
      }
      means[a] = mean_of(per_run);
      sds[a] = stddev_of(per_run);
      sizes[a] = mean_of(per_run_size);
    }
    const std::size_t best =
        static_cast<std::size_t>(std::max_element(means.begin(), means.end()) - means.begin());
    res.best_alpha[kind] = cfg.alpha_grid[best];
    for (std::size_t a = 0; a < na; ++a) {
      res.sweep.push_back({kind, cfg.alpha_grid[a], means[a], sds[a], sizes[a], a == best});
    }
    const std::string stream = std::string(to_string(kind)) + "/" + std::to_string(best);
    for (std::size_t r = 0; r < runs; ++r) {
      auto& ev = evals[r];
      const auto& st = stages[r];
      const auto& t = ev.conformal.at(kind).thresholds[best];
      auto& mr = ev.methods[method_of(kind)];
      Scorer score{cfg, ev.confusion, r};
      for (std::size_t i = 0; i < st.test_f.size(); ++i) {
        mr.sets.push_back(conformal_set(st.test_f[i], t, kind));
        mr.objective.push_back(expected_accuracy(mr.sets.back(), st.test_f[i], ev.confusion));
        mr.accuracy.push_back(score(mr.sets.back(), st.test_y[i], stream, i));
      }
      res.records.push_back({std::string(to_string(method_of(kind))), res.config_hash, r, "alpha",
                             cfg.alpha_grid[best]});
    }
  }

  for (Method m : cfg.methods) {
    MethodSummary sum;
    std::vector<double> sizes, covs;
    for (std::size_t r = 0; r < runs; ++r) {
      const auto& mr = evals[r].methods.at(m);
      const auto& st = stages[r];
      const double acc = mean_of(mr.accuracy);
      double size = 0.0;
      std::size_t covered = 0;
      for (std::size_t i = 0; i < mr.sets.size(); ++i) {
        size += static_cast<double>(mr.sets[i].size());
        covered += mr.sets[i].contains(st.test_y[i]) ? 1 : 0;
        res.instances.push_back({std::string(to_string(m)), res.config_hash, r, st.test_ids[i],
                                 st.test_y[i], evals[r].confuser[st.test_y[i]], mr.sets[i],
                                 mr.accuracy[i]});
      }
      const double nn = static_cast<double>(std::max<std::size_t>(1, mr.sets.size()));
      sum.per_run.push_back(acc);
      sizes.push_back(size / nn);
      covs.push_back(static_cast<double>(covered) / nn);
      const std::string name(to_string(m));
      res.records.push_back({name, res.config_hash, r, "accuracy", acc});
      res.records.push_back({name, res.config_hash, r, "objective", mean_of(mr.objective)});
      res.records.push_back({name, res.config_hash, r, "mean_set_size", size / nn});
      res.records.push_back({name, res.config_hash, r, "coverage", static_cast<double>(covered) / nn});
    }
    sum.mean = mean_of(sum.per_run);
    sum.stddev = stddev_of(sum.per_run);
    sum.mean_set_size = mean_of(sizes);
    sum.coverage = mean_of(covs);
    res.summary[m] = std::move(sum);
  }

  if (cfg.has(Method::Greedy) && cfg.has(Method::BruteForce)) {
    for (std::size_t r = 0; r < runs; ++r) {
      const auto& ratios = evals[r].ratios;
      std::size_t equal = 0;
      for (double x : ratios) equal += x >= 1.0 - 1e-12 ? 1 : 0;
      res.records.push_back({"brute_force", res.config_hash, r, "greedy_ratio_mean", mean_of(ratios)});
      res.records.push_back({"brute_force", res.config_hash, r, "greedy_equal_rate",
                             static_cast<double>(equal) / static_cast<double>(std::max<std::size_t>(1, ratios.size()))});
      res.greedy_brute_ratios.insert(res.greedy_brute_ratios.end(), ratios.begin(), ratios.end());
    }
  }
  return res;
}

ExperimentResult evaluate_stages(const ExperimentConfig& cfg, const std::vector<TaskStage>& stages) {
  std::optional<ConfusionMatrix> loaded;
  if (cfg.expert_source == ExpertSource::ConfusionFile) loaded = load_confusion(cfg.confusion_path);
  std::vector<RunEval> evals(stages.size());
  parallel_for(stages.size(), cfg.threads,
               [&](std::size_t r) { evals[r] = evaluate_run(cfg, stages[r], r, loaded); });
  return finalize(cfg, stages, evals);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return evaluate_stages(cfg, build_stages(cfg));
}

std::vector<SweepPoint> alpha_sweep(const ExperimentConfig& cfg) {
  auto c = cfg;
  std::erase_if(c.methods, [](Method m) { return m != Method::NaiveCp && m != Method::ApsCp; });
  if (c.methods.empty()) c.methods = {Method::NaiveCp, Method::ApsCp};
  return run_experiment(c).sweep;
}

std::vector<GridCell> run_grid(const ExperimentConfig& base, const GridSpec& grid) {
  std::vector<GridCell> cells;
  for (double target : grid.targets) {
    ExperimentConfig tc = base;
    tc.target_accuracy = target;
    tc.validate();
    const auto stages = build_stages(tc);
    for (double gamma : grid.gammas) {
      ExperimentConfig cc = tc;
      cc.gamma = gamma;
      cc.validate();
      cells.push_back({gamma, target, evaluate_stages(cc, stages)});
    }
  }
  return cells;
}

std::vector<PairInclusion> pair_inclusion_stats(const std::vector<InstanceResult>& instances) {
  struct Acc {
    std::size_t count = 0;
    std::size_t pairs = 0;
    double size = 0.0;
  };
  std::map<std::pair<std::string, LabelId>, Acc> acc;
  for (const auto& r : instances) {
    auto& a = acc[{r.method, r.true_label}];
    ++a.count;
    a.size += static_cast<double>(r.set.size());
    if (r.set.contains(r.true_label) && r.set.contains(r.confuser)) ++a.pairs;
  }
  std::vector<PairInclusion> out;
  for (const auto& [key, a] : acc) {
    out.push_back({key.first, key.second, a.count,
                   static_cast<double>(a.pairs) / static_cast<double>(a.count),
                   a.size / static_cast<double>(a.count)});
  }
  return out;
}

std::vector<CcdfPoint> ccdf(const std::vector<double>& accuracies) {
  std::vector<CcdfPoint> out;
  for (int i = 0; i <= 20; ++i) {
    const double t = i / 20.0;
    std::size_t above = 0;
    for (double a : accuracies) above += a >= t ? 1 : 0;
    out.push_back({t, accuracies.empty() ? 0.0
                                         : static_cast<double>(above) /
                                               static_cast<double>(accuracies.size())});
  }
  return out;
}

void write_table(const std::filesystem::path& path, const std::vector<ResultRecord>& records) {
  struct Cell {
    std::vector<double> accuracy, size, coverage, alpha;
  };
  struct Config {
    std::vector<double> gamma, target, classifier;
  };
  std::map<std::string, Config> configs;
  std::map<std::pair<std::string, std::string>, Cell> cells;
  for (const auto& r : records) {
    if (r.method == "config") {
      auto& c = configs[r.config_hash];
      if (r.metric == "gamma") c.gamma.push_back(r.value);
      if (r.metric == "target_accuracy") c.target.push_back(r.value);
      if (r.metric == "classifier_accuracy") c.classifier.push_back(r.value);
      continue;
    }
    auto& c = cells[{r.config_hash, r.method}];
    if (r.metric == "accuracy") c.accuracy.push_back(r.value);
    if (r.metric == "mean_set_size") c.size.push_back(r.value);
    if (r.metric == "coverage") c.coverage.push_back(r.value);
    if (r.metric == "alpha") c.alpha.push_back(r.value);
  }
  std::string out =
      "config_hash,gamma,target_accuracy,classifier_accuracy,method,mean,std,mean_set_size,coverage,alpha\n";
  for (const auto& [key, c] : cells) {
    if (c.accuracy.empty()) continue;
    const auto& cfg = configs[key.first];
    out += key.first + ',' + format_double(mean_of(cfg.gamma)) + ',' + format_double(mean_of(cfg.target)) +
           ',' + format_double(mean_of(cfg.classifier)) + ',' + key.second + ',' +
           format_double(mean_of(c.accuracy)) + ',' + format_double(stddev_of(c.accuracy)) + ',' +
           format_double(mean_of(c.size)) + ',' + format_double(mean_of(c.coverage)) + ',' +
           (c.alpha.empty() ? std::string() : format_double(mean_of(c.alpha))) + '\n';
  }
  write_text(path, out);
}

void write_table(const std::filesystem::path& path, const std::vector<GridCell>& cells) {
  std::vector<ResultRecord> records;
  for (const auto& cell : cells) {
    records.insert(records.end(), cell.result.records.begin(), cell.result.records.end());
  }
  write_table(path, records);
}

void write_sweep(const std::filesystem::path& path, const std::vector<GridCell>& cells) {
  std::string out = "config_hash,gamma,target_accuracy,method,alpha,mean,std,mean_set_size,best\n";
  for (const auto& cell : cells) {
    for (const auto& p : cell.result.sweep) {
      out += cell.result.config_hash + ',' + format_double(cell.gamma) + ',' +
             format_double(cell.target_accuracy) + ',' + std::string(to_string(method_of(p.kind))) + ',' +
             format_double(p.alpha) + ',' + format_double(p.mean) + ',' + format_double(p.stddev) + ',' +
             format_double(p.mean_set_size) + ',' + (p.best ? "1" : "0") + '\n';
    }
  }
  write_text(path, out);
}

void write_pairs(const std::filesystem::path& path, const std::vector<InstanceResult>& instances) {
  std::map<std::string, std::vector<InstanceResult>> by_config;
  for (const auto& r : instances) by_config[r.config_hash].push_back(r);
  std::string out = "config_hash,method,label,count,pair_probability,mean_set_size\n";
  for (const auto& [hash, rows] : by_config) {
    for (const auto& p : pair_inclusion_stats(rows)) {
      out += hash + ',' + p.method + ',' + std::to_string(p.label) + ',' + std::to_string(p.count) +
             ',' + format_double(p.pair_probability) + ',' + format_double(p.mean_set_size) + '\n';
    }
  }
  write_text(path, out);
}

void write_ccdf(const std::filesystem::path& path, const std::vector<InstanceResult>& instances) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> acc;
  for (const auto& r : instances) acc[{r.config_hash, r.method}].push_back(r.accuracy);
  std::string out = "config_hash,method,threshold,fraction\n";
  for (const auto& [key, values] : acc) {
    for (const auto& p : ccdf(values)) {
      out += key.first + ',' + key.second + ',' + format_double(p.threshold) + ',' +
             format_double(p.fraction) + '\n';
    }
  }
  write_text(path, out);
}

}  // namespace predset
