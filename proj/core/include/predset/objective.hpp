#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "predset/core.hpp"

namespace predset {

// Expected accuracy of an MNL-mixture expert restricted to `set`:
//   sum_{y in set} f_y * C[y][y] / sum_{y' in set} C[y'][y].
// Empty set scores 0; terms with a zero denominator contribute 0.
double expected_accuracy(std::span<const LabelId> set, const ProbVector& f,
                         const ConfusionMatrix& confusion);
inline double expected_accuracy(const PredictionSet& set, const ProbVector& f,
                                const ConfusionMatrix& confusion) {
  return expected_accuracy(set.members(), f, confusion);
}

// Same formula evaluated under the ground-truth label distribution. Kept
// separate so code never mixes up the classifier estimate and the truth.
double true_expected_accuracy(const PredictionSet& set, const ProbVector& p_true,
                              const ConfusionMatrix& confusion);

// Running state for incremental evaluation of the objective. `denominators()[y]`
// holds sum_{y' in set} C[y'][y] for every label y, so a marginal gain costs
// O(|set| + 1).
class ObjectiveState {
 public:
  explicit ObjectiveState(std::size_t label_count);

  std::span<const LabelId> members() const noexcept { return members_; }
  std::span<const double> denominators() const noexcept { return denom_; }
  double value() const noexcept { return value_; }
  bool contains(LabelId y) const { return in_set_.at(y) != 0; }
  std::size_t size() const noexcept { return members_.size(); }

  double marginal_gain(LabelId candidate, const ProbVector& f,
                       const ConfusionMatrix& confusion) const;
  // Adds `candidate` and returns the updated objective value.
  double commit(LabelId candidate, const ProbVector& f, const ConfusionMatrix& confusion);

  PredictionSet to_set() const { return PredictionSet(members_); }

 private:
  double value_with(LabelId candidate, const ProbVector& f, const ConfusionMatrix& confusion) const;

  std::vector<LabelId> members_;  // insertion order
  std::vector<char> in_set_;
  std::vector<double> denom_;
  double value_ = 0.0;
};

struct ChoiceDistribution {
  std::vector<LabelId> labels;
  std::vector<double> probabilities;
  // Set when every confusion weight on the set was zero for the true label
  // and the uniform distribution was used instead.
  bool uniform_fallback = false;

  double probability_of(LabelId y) const;
};

ChoiceDistribution mnl_choice_distribution(const PredictionSet& set, LabelId true_label,
                                           const ConfusionMatrix& confusion);

LabelId sample_expert_prediction(const PredictionSet& set, LabelId true_label,
                                 const ConfusionMatrix& confusion, RngStream& rng);

}  // namespace predset
