#pragma once

// Synthetic classification tasks (Gaussian clusters on hypercube vertices),
// a full-batch softmax-regression trainer, and the noised-feature expert
// protocol used to produce expert confusion matrices.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "predset/core.hpp"

namespace predset {

struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

struct LabeledData {
  std::size_t label_count = 0;
  FeatureMatrix x;
  std::vector<LabelId> y;

  std::size_t size() const noexcept { return y.size(); }
  LabeledData subset(std::span<const std::size_t> indices) const;
};

struct TaskConfig {
  std::size_t label_count = 10;
  std::size_t d_total = 20;
  std::size_t d_informative = 4;
  double class_sep = 1.0;
  std::size_t train = 16000;
  std::size_t calib = 1000;
  std::size_t test = 1000;
  std::uint64_t seed = 0;

  std::size_t total() const noexcept { return train + calib + test; }
  void validate() const;
};

struct SyntheticTask {
  LabeledData data;
  // vertex_signs[c][j] in {-1,+1}: class c sits at class_sep * vertex_signs[c]
  // in the informative subspace.
  std::vector<std::vector<double>> vertex_signs;
  double class_sep = 0.0;
};

// Noise draws do not depend on class_sep, so regenerating with the same
// stream and a different separation only moves the cluster centres.
SyntheticTask gen_task(const TaskConfig& cfg, RngStream rng);
SyntheticTask gen_task(const TaskConfig& cfg);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t calib = 0;
  std::size_t test = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train_a;  // first half of the training split
  std::vector<std::size_t> train_b;  // second half
  std::vector<std::size_t> calib;
  std::vector<std::size_t> test;
};

// Uniform shuffle, then consecutive partition.
SplitIndices split_indices(std::size_t count, const SplitSizes& sizes, RngStream& rng);
// Assigns split tags to the records of `ds`.
Dataset split_dataset(Dataset ds, const SplitSizes& sizes, RngStream& rng);

// Weights are label_count x (feature_count + 1), row-major, bias last.
struct SoftmaxModel {
  std::size_t label_count = 0;
  std::size_t feature_count = 0;
  std::vector<double> weights;

  double weight(std::size_t label, std::size_t feature) const {
    return weights[label * (feature_count + 1) + feature];
  }
};

struct TrainOptions {
  std::size_t epochs = 500;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

// Mean multinomial cross-entropy plus (l2/2) * ||W||^2 over non-bias
// weights, with its gradient. `weights` uses the SoftmaxModel layout.
struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};
LossGradient softmax_loss_and_gradient(std::span<const double> weights, const LabeledData& data,
                                       double l2);

// Full-batch gradient descent from zero weights on standardized features;
// the standardization is folded back into the returned weights. The loss of
// every epoch is appended to `loss_history` when given.
SoftmaxModel train_softmax(const LabeledData& data, const TrainOptions& options = {},
                           std::vector<double>* loss_history = nullptr);

ProbVector predict_proba(const SoftmaxModel& model, std::span<const double> x);
LabelId predict_label(const SoftmaxModel& model, std::span<const double> x);
double classifier_accuracy(const SoftmaxModel& model, const LabeledData& data);

inline constexpr std::size_t kNoisedFeature = 0;

// Replaces feature kNoisedFeature of every row by (1-gamma)*a + gamma*eps,
// eps ~ N(0,1) drawn fresh per row.
LabeledData noise_feature(LabeledData data, double gamma, RngStream& rng);

struct NoisyExpert {
  SoftmaxModel model;
  std::vector<LabelId> calib_predictions;
  ConfusionMatrix confusion;
};

// Trains the expert model on noised `train2`, predicts the equally noised
// `calib` rows and estimates the confusion matrix from (prediction, truth).
NoisyExpert simulate_noisy_expert(const LabeledData& train2, const LabeledData& calib,
                                  double gamma, RngStream& rng, const TrainOptions& options = {},
                                  double smoothing = 0.0);
ConfusionMatrix gen_expert_confusion(const LabeledData& train2, const LabeledData& calib,
                                     double gamma, RngStream& rng,
                                     const TrainOptions& options = {}, double smoothing = 0.0);

struct SeparationFit {
  double class_sep = 0.0;
  double accuracy = 0.0;  // classifier accuracy on the calibration split
  std::size_t iterations = 0;  // training runs spent
};

inline constexpr double kSeparationTolerance = 0.03;

// Bisection over class_sep until the classifier trained on the first
// training half reaches `target_accuracy` within `tolerance` on the
// calibration split (or the iteration budget runs out; the closest fit wins).
SeparationFit tune_class_sep(const TaskConfig& cfg, const RngStream& task_rng,
                             const RngStream& split_rng, double target_accuracy,
                             const TrainOptions& options = {},
                             double tolerance = kSeparationTolerance,
                             std::size_t max_iterations = 20);

}  // namespace predset
