#include "predset/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace predset {

LabeledData LabeledData::subset(std::span<const std::size_t> indices) const {
  LabeledData out;
  out.label_count = label_count;
  out.x.rows = indices.size();
  out.x.cols = x.cols;
  out.x.data.reserve(indices.size() * x.cols);
  out.y.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto r = x.row(i);
    out.x.data.insert(out.x.data.end(), r.begin(), r.end());
    out.y.push_back(y[i]);
  }
  return out;
}

void TaskConfig::validate() const {
  if (label_count < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 labels");
  if (d_informative == 0 || d_informative > d_total) {
    throw Error(ErrorCode::InvalidArgument, "d_informative must lie in [1, d_total]");
  }
  if (d_informative >= 63 || (std::uint64_t{1} << d_informative) < label_count) {
    throw Error(ErrorCode::TooManyClassesForHypercube,
                std::to_string(label_count) + " classes need more than " +
                    std::to_string(d_informative) + " informative dimensions");
  }
  if (!(class_sep >= 0.0) || !std::isfinite(class_sep)) {
    throw Error(ErrorCode::InvalidArgument, "class_sep must be finite and nonnegative");
  }
  if (train == 0 || calib == 0 || test == 0) {
    throw Error(ErrorCode::InvalidArgument, "split sizes must be positive");
  }
}

SyntheticTask gen_task(const TaskConfig& cfg, RngStream rng) {
  cfg.validate();
  const std::size_t l = cfg.label_count;
  const std::size_t n = cfg.total();
  const std::size_t d = cfg.d_total;

  // Distinct vertices via a partial Fisher-Yates over all 2^d_informative.
  std::vector<std::uint64_t> vertices(std::size_t{1} << cfg.d_informative);
  std::iota(vertices.begin(), vertices.end(), std::uint64_t{0});
  for (std::size_t c = 0; c < l; ++c) {
    const std::size_t pick = c + rng.uniform_index(vertices.size() - c);
    std::swap(vertices[c], vertices[pick]);
  }
  SyntheticTask task;
  task.class_sep = cfg.class_sep;
  task.vertex_signs.assign(l, std::vector<double>(cfg.d_informative));
  for (std::size_t c = 0; c < l; ++c) {
    for (std::size_t j = 0; j < cfg.d_informative; ++j) {
      task.vertex_signs[c][j] = (vertices[c] >> j & 1U) ? 1.0 : -1.0;
    }
  }

  auto& data = task.data;
  data.label_count = l;
  data.x.rows = n;
  data.x.cols = d;
  data.x.data.resize(n * d);
  data.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LabelId c = i % l;  // balanced: class counts differ by at most one
    data.y[i] = c;
    auto row = data.x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double noise = rng.normal();
      row[j] = j < cfg.d_informative ? cfg.class_sep * task.vertex_signs[c][j] + noise : noise;
    }
  }
  return task;
}

SyntheticTask gen_task(const TaskConfig& cfg) { return gen_task(cfg, RngStream(cfg.seed, "task")); }

SplitIndices split_indices(std::size_t count, const SplitSizes& sizes, RngStream& rng) {
  if (sizes.train + sizes.calib + sizes.test != count) {
    throw Error(ErrorCode::SizeMismatch,
                "split sizes sum to " + std::to_string(sizes.train + sizes.calib + sizes.test) +
                    " for " + std::to_string(count) + " records");
  }
  std::vector<std::size_t> perm(count);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  SplitIndices out;
  auto it = perm.begin();
  const std::size_t half = sizes.train / 2;
  out.train_a.assign(it, it + static_cast<std::ptrdiff_t>(half));
  it += static_cast<std::ptrdiff_t>(half);
  out.train_b.assign(it, it + static_cast<std::ptrdiff_t>(sizes.train - half));
  it += static_cast<std::ptrdiff_t>(sizes.train - half);
  out.calib.assign(it, it + static_cast<std::ptrdiff_t>(sizes.calib));
  it += static_cast<std::ptrdiff_t>(sizes.calib);
  out.test.assign(it, perm.end());
  return out;
}

Dataset split_dataset(Dataset ds, const SplitSizes& sizes, RngStream& rng) {
  const auto idx = split_indices(ds.records.size(), sizes, rng);
  ds.splits.clear();
  for (auto i : idx.train_a) ds.splits[ds.records[i].id] = Split::Train;
  for (auto i : idx.train_b) ds.splits[ds.records[i].id] = Split::Train;
  for (auto i : idx.calib) ds.splits[ds.records[i].id] = Split::Calib;
  for (auto i : idx.test) ds.splits[ds.records[i].id] = Split::Test;
  return ds;
}

namespace {

// logits = W * [x; 1]; turns `logits` into softmax probabilities in place and
// returns log-sum-exp.
double softmax_in_place(std::span<double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : logits) v /= sum;
  return mx + std::log(sum);
}

void affine_scores(std::span<const double> weights, std::size_t l, std::size_t d,
                   std::span<const double> x, std::span<double> out) {
  for (std::size_t c = 0; c < l; ++c) {
    const double* w = weights.data() + c * (d + 1);
    double s = w[d];
    for (std::size_t j = 0; j < d; ++j) s += w[j] * x[j];
    out[c] = s;
  }
}

}  // namespace

LossGradient softmax_loss_and_gradient(std::span<const double> weights, const LabeledData& data,
                                       double l2) {
  const std::size_t l = data.label_count;
  const std::size_t d = data.x.cols;
  const std::size_t n = data.size();
  if (weights.size() != l * (d + 1)) throw Error(ErrorCode::SizeMismatch, "weight layout");
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "no training data");
  LossGradient out;
  out.gradient.assign(weights.size(), 0.0);
  std::vector<double> p(l);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = data.x.row(i);
    affine_scores(weights, l, d, x, p);
    const double target_logit = p[data.y[i]];
    loss += softmax_in_place(p) - target_logit;
    for (std::size_t c = 0; c < l; ++c) {
      const double g = (p[c] - (c == data.y[i] ? 1.0 : 0.0)) * inv_n;
      double* gr = out.gradient.data() + c * (d + 1);
      for (std::size_t j = 0; j < d; ++j) gr[j] += g * x[j];
      gr[d] += g;
    }
  }
  loss *= inv_n;
  double penalty = 0.0;
  for (std::size_t c = 0; c < l; ++c) {
    for (std::size_t j = 0; j < d; ++j) {
      const double w = weights[c * (d + 1) + j];
      penalty += w * w;
      out.gradient[c * (d + 1) + j] += l2 * w;
    }
  }
  out.loss = loss + 0.5 * l2 * penalty;
  return out;
}

SoftmaxModel train_softmax(const LabeledData& data, const TrainOptions& options,
                           std::vector<double>* loss_history) {
  const std::size_t l = data.label_count;
  const std::size_t d = data.x.cols;
  const std::size_t n = data.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "no training data");
  if (l < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 labels");

  std::vector<double> mean(d, 0.0);
  std::vector<double> scale(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = data.x.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = data.x.row(i);
    for (std::size_t j = 0; j < d; ++j) scale[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
  }
  for (auto& s : scale) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 0.0)) s = 1.0;
  }
  LabeledData z = data;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = z.x.row(i);
    for (std::size_t j = 0; j < d; ++j) r[j] = (r[j] - mean[j]) / scale[j];
  }

  std::vector<double> w(l * (d + 1), 0.0);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    auto lg = softmax_loss_and_gradient(w, z, options.l2);
    if (!std::isfinite(lg.loss)) {
      throw Error(ErrorCode::NonFiniteLoss,
                  "epoch " + std::to_string(epoch) + "; learning rate too high?");
    }
    if (loss_history) loss_history->push_back(lg.loss);
    for (std::size_t t = 0; t < w.size(); ++t) w[t] -= options.learning_rate * lg.gradient[t];
  }
  if (loss_history && options.epochs > 0) {
    const double final_loss = softmax_loss_and_gradient(w, z, options.l2).loss;
    if (!std::isfinite(final_loss)) throw Error(ErrorCode::NonFiniteLoss, "final epoch");
    loss_history->push_back(final_loss);
  }

  SoftmaxModel model{l, d, std::vector<double>(l * (d + 1), 0.0)};
  for (std::size_t c = 0; c < l; ++c) {
    double bias = w[c * (d + 1) + d];
    for (std::size_t j = 0; j < d; ++j) {
      const double wj = w[c * (d + 1) + j] / scale[j];
      model.weights[c * (d + 1) + j] = wj;
      bias -= wj * mean[j];
    }
    model.weights[c * (d + 1) + d] = bias;
  }
  return model;
}

ProbVector predict_proba(const SoftmaxModel& model, std::span<const double> x) {
  if (x.size() != model.feature_count) throw Error(ErrorCode::SizeMismatch, "feature count");
  std::vector<double> p(model.label_count);
  affine_scores(model.weights, model.label_count, model.feature_count, x, p);
  softmax_in_place(p);
  return ProbVector::make(std::move(p));
}

LabelId predict_label(const SoftmaxModel& model, std::span<const double> x) {
  if (x.size() != model.feature_count) throw Error(ErrorCode::SizeMismatch, "feature count");
  std::vector<double> s(model.label_count);
  affine_scores(model.weights, model.label_count, model.feature_count, x, s);
  return static_cast<LabelId>(std::max_element(s.begin(), s.end()) - s.begin());
}

double classifier_accuracy(const SoftmaxModel& model, const LabeledData& data) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    hits += predict_label(model, data.x.row(i)) == data.y[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

LabeledData noise_feature(LabeledData data, double gamma, RngStream& rng) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "gamma must lie in [0,1]");
  }
  if (data.x.cols <= kNoisedFeature) throw Error(ErrorCode::SizeMismatch, "no feature to noise");
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto r = data.x.row(i);
    const double eps = rng.normal();
    r[kNoisedFeature] = (1.0 - gamma) * r[kNoisedFeature] + gamma * eps;
  }
  return data;
}

NoisyExpert simulate_noisy_expert(const LabeledData& train2, const LabeledData& calib,
                                  double gamma, RngStream& rng, const TrainOptions& options,
                                  double smoothing) {
  const auto noisy_train = noise_feature(train2, gamma, rng);
  const auto noisy_calib = noise_feature(calib, gamma, rng);
  NoisyExpert out;
  out.model = train_softmax(noisy_train, options);
  const std::size_t l = train2.label_count;
  std::vector<std::vector<std::uint64_t>> counts(l, std::vector<std::uint64_t>(l, 0));
  out.calib_predictions.reserve(calib.size());
  for (std::size_t i = 0; i < noisy_calib.size(); ++i) {
    const LabelId pred = predict_label(out.model, noisy_calib.x.row(i));
    out.calib_predictions.push_back(pred);
    ++counts[pred][noisy_calib.y[i]];
  }
  out.confusion = normalize_counts(counts, smoothing);
  return out;
}

ConfusionMatrix gen_expert_confusion(const LabeledData& train2, const LabeledData& calib,
                                     double gamma, RngStream& rng, const TrainOptions& options,
                                     double smoothing) {
  return simulate_noisy_expert(train2, calib, gamma, rng, options, smoothing).confusion;
}

SeparationFit tune_class_sep(const TaskConfig& cfg, const RngStream& task_rng,
                             const RngStream& split_rng, double target_accuracy,
                             const TrainOptions& options, double tolerance,
                             std::size_t max_iterations) {
  auto accuracy_at = [&](double sep) {
    TaskConfig c = cfg;
    c.class_sep = sep;
    const auto task = gen_task(c, task_rng);
    RngStream srng = split_rng;
    const auto idx = split_indices(task.data.size(), {c.train, c.calib, c.test}, srng);
    const auto model = train_softmax(task.data.subset(idx.train_a), options);
    return classifier_accuracy(model, task.data.subset(idx.calib));
  };

  SeparationFit best;
  double best_gap = 2.0;
  double lo = 0.0;
  double hi = 8.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const double sep = 0.5 * (lo + hi);
    const double acc = accuracy_at(sep);
    const double gap = std::abs(acc - target_accuracy);
    if (gap < best_gap) {
      best_gap = gap;
      best.class_sep = sep;
      best.accuracy = acc;
    }
    best.iterations = it + 1;
    if (gap <= tolerance) break;
    (acc < target_accuracy ? lo : hi) = sep;
  }
  return best;
}

}  // namespace predset
