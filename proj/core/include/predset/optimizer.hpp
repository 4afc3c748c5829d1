#pragma once

#include <cstddef>
#include <vector>

#include "predset/core.hpp"

namespace predset {

// Labels sorted by descending score; equal scores keep ascending label order.
std::vector<LabelId> rank_labels(const ProbVector& f);

struct GreedyRound {
  PredictionSet best_set;  // best set seen while growing this round's set
  double best_value = 0.0;
};

struct GreedyTrace {
  std::vector<GreedyRound> rounds;
  // Number of marginal-gain evaluations; L(L+1)(L+2)/6 for L labels.
  std::size_t evaluations = 0;
};

struct GreedyResult {
  PredictionSet set;
  double value = 0.0;
  GreedyTrace trace;
};

// Round k grows a set from scratch over the k top-ranked labels, always
// adding the label with the largest marginal gain, and the best set seen over
// all rounds and iterations is returned. Falls back to the top-ranked label
// if no nonempty set ever beat the empty set.
GreedyResult greedy_set(const ProbVector& f, const ConfusionMatrix& confusion);

struct BruteForceResult {
  PredictionSet set;
  double value = 0.0;
};

inline constexpr std::size_t kDefaultBruteForceLimit = 20;

// Exhaustive maximum over all nonempty subsets. Ties go to the smaller set,
// then to the lexicographically smaller member list.
BruteForceResult brute_force_set(const ProbVector& f, const ConfusionMatrix& confusion,
                                 std::size_t max_labels = kDefaultBruteForceLimit);

// Objective of each ranking prefix {y_(1)}, {y_(1), y_(2)}, ..., all labels.
std::vector<double> chain_prefix_values(const ProbVector& f, const ConfusionMatrix& confusion);

constexpr std::size_t greedy_evaluation_count(std::size_t l) { return l * (l + 1) * (l + 2) / 6; }

}  // namespace predset
