#include "predset/optimizer.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "predset/objective.hpp"

namespace predset {

std::vector<LabelId> rank_labels(const ProbVector& f) {
  std::vector<LabelId> order(f.size());
  std::iota(order.begin(), order.end(), LabelId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](LabelId a, LabelId b) { return f[a] > f[b]; });
  return order;
}

GreedyResult greedy_set(const ProbVector& f, const ConfusionMatrix& confusion) {
  if (f.size() != confusion.size()) {
    throw Error(ErrorCode::SizeMismatch, "probability vector and confusion matrix disagree on L");
  }
  const std::size_t l = f.size();
  const auto ranking = rank_labels(f);

  GreedyResult result;
  result.trace.rounds.reserve(l);
  double best_value = 0.0;  // objective of the empty set
  std::vector<LabelId> best_members;

  for (std::size_t k = 1; k <= l; ++k) {
    ObjectiveState state(l);
    GreedyRound round;
    round.best_value = -std::numeric_limits<double>::infinity();
    while (state.size() < k) {
      double best_gain = -std::numeric_limits<double>::infinity();
      LabelId chosen = ranking[0];
      for (std::size_t i = 0; i < k; ++i) {
        const LabelId y = ranking[i];
        if (state.contains(y)) continue;
        const double gain = state.marginal_gain(y, f, confusion);
        ++result.trace.evaluations;
        if (gain > best_gain) {
          best_gain = gain;
          chosen = y;
        }
      }
      const double value = state.commit(chosen, f, confusion);
      if (value > round.best_value) {
        round.best_value = value;
        round.best_set = state.to_set();
      }
      if (value > best_value) {
        best_value = value;
        best_members.assign(state.members().begin(), state.members().end());
      }
    }
    result.trace.rounds.push_back(std::move(round));
  }

  if (best_members.empty()) {
    result.set = PredictionSet{ranking.front()};
    result.value = expected_accuracy(result.set, f, confusion);
  } else {
    result.set = PredictionSet(std::move(best_members));
    result.value = best_value;
  }
  return result;
}

BruteForceResult brute_force_set(const ProbVector& f, const ConfusionMatrix& confusion,
                                 std::size_t max_labels) {
  if (f.size() != confusion.size()) {
    throw Error(ErrorCode::SizeMismatch, "probability vector and confusion matrix disagree on L");
  }
  const std::size_t l = f.size();
  if (l > max_labels || l >= 63) {
    throw Error(ErrorCode::LabelCountExceedsBruteForceLimit,
                std::to_string(l) + " labels exceeds limit " + std::to_string(max_labels));
  }
  const std::uint64_t limit = std::uint64_t{1} << l;
  std::uint64_t best_mask = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<LabelId> members;
  members.reserve(l);
  std::vector<LabelId> best_members;

  for (std::uint64_t mask = 1; mask < limit; ++mask) {
    members.clear();
    for (LabelId y = 0; y < l; ++y) {
      if (mask >> y & 1U) members.push_back(y);
    }
    const double value = expected_accuracy(members, f, confusion);
    bool take = value > best_value;
    if (!take && value == best_value) {
      if (members.size() != best_members.size()) {
        take = members.size() < best_members.size();
      } else {
        take = members < best_members;
      }
    }
    if (take) {
      best_value = value;
      best_mask = mask;
      best_members = members;
    }
  }
  return {PredictionSet::from_mask(best_mask), best_value};
}

std::vector<double> chain_prefix_values(const ProbVector& f, const ConfusionMatrix& confusion) {
  const auto ranking = rank_labels(f);
  ObjectiveState state(f.size());
  std::vector<double> values;
  values.reserve(ranking.size());
  for (LabelId y : ranking) values.push_back(state.commit(y, f, confusion));
  return values;
}

}  // namespace predset
