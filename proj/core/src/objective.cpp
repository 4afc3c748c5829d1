#include "predset/objective.hpp"

#include <algorithm>
#include <string>

namespace predset {

namespace {

void check_label(LabelId y, std::size_t l) {
  if (y >= l) {
    throw Error(ErrorCode::LabelOutOfRange,
                "label " + std::to_string(y) + " outside [0," + std::to_string(l) + ")");
  }
}

void check_sizes(const ProbVector& f, const ConfusionMatrix& c) {
  if (f.size() != c.size()) {
    throw Error(ErrorCode::SizeMismatch, "probability vector and confusion matrix disagree on L");
  }
}

}  // namespace

double expected_accuracy(std::span<const LabelId> set, const ProbVector& f,
                         const ConfusionMatrix& confusion) {
  check_sizes(f, confusion);
  const std::size_t l = f.size();
  double total = 0.0;
  for (LabelId y : set) {
    check_label(y, l);
    double denom = 0.0;
    for (LabelId other : set) denom += confusion.at(other, y);
    if (denom > 0.0) total += f[y] * confusion.at(y, y) / denom;
  }
  return total;
}

double true_expected_accuracy(const PredictionSet& set, const ProbVector& p_true,
                              const ConfusionMatrix& confusion) {
  return expected_accuracy(set.members(), p_true, confusion);
}

ObjectiveState::ObjectiveState(std::size_t label_count)
    : in_set_(label_count, 0), denom_(label_count, 0.0) {}

double ObjectiveState::value_with(LabelId candidate, const ProbVector& f,
                                  const ConfusionMatrix& confusion) const {
  double total = 0.0;
  for (LabelId y : members_) {
    const double denom = denom_[y] + confusion.at(candidate, y);
    if (denom > 0.0) total += f[y] * confusion.at(y, y) / denom;
  }
  const double denom = denom_[candidate] + confusion.at(candidate, candidate);
  if (denom > 0.0) total += f[candidate] * confusion.at(candidate, candidate) / denom;
  return total;
}

double ObjectiveState::marginal_gain(LabelId candidate, const ProbVector& f,
                                     const ConfusionMatrix& confusion) const {
  check_label(candidate, denom_.size());
  if (in_set_[candidate]) {
    throw Error(ErrorCode::CandidateAlreadyInSet, "label " + std::to_string(candidate));
  }
  return value_with(candidate, f, confusion) - value_;
}

double ObjectiveState::commit(LabelId candidate, const ProbVector& f,
                              const ConfusionMatrix& confusion) {
  check_label(candidate, denom_.size());
  if (in_set_[candidate]) {
    throw Error(ErrorCode::CandidateAlreadyInSet, "label " + std::to_string(candidate));
  }
  value_ = value_with(candidate, f, confusion);
  for (std::size_t y = 0; y < denom_.size(); ++y) denom_[y] += confusion.at(candidate, y);
  members_.push_back(candidate);
  in_set_[candidate] = 1;
  return value_;
}

double ChoiceDistribution::probability_of(LabelId y) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == y) return probabilities[i];
  }
  return 0.0;
}

ChoiceDistribution mnl_choice_distribution(const PredictionSet& set, LabelId true_label,
                                           const ConfusionMatrix& confusion) {
  if (set.empty()) throw Error(ErrorCode::EmptySet, "choice distribution over empty set");
  check_label(true_label, confusion.size());
  ChoiceDistribution out;
  out.labels.assign(set.begin(), set.end());
  out.probabilities.resize(set.size());
  double norm = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    check_label(out.labels[i], confusion.size());
    out.probabilities[i] = confusion.at(out.labels[i], true_label);
    norm += out.probabilities[i];
  }
  if (norm > 0.0) {
    for (auto& p : out.probabilities) p /= norm;
  } else {
    std::fill(out.probabilities.begin(), out.probabilities.end(),
              1.0 / static_cast<double>(set.size()));
    out.uniform_fallback = true;
  }
  return out;
}

LabelId sample_expert_prediction(const PredictionSet& set, LabelId true_label,
                                 const ConfusionMatrix& confusion, RngStream& rng) {
  const auto dist = mnl_choice_distribution(set, true_label, confusion);
  if (dist.labels.size() == 1) return dist.labels.front();
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.labels.size(); ++i) {
    acc += dist.probabilities[i];
    if (u < acc) return dist.labels[i];
  }
  // Rounding left u above the last partial sum: take the last label with mass.
  for (std::size_t i = dist.labels.size(); i-- > 0;) {
    if (dist.probabilities[i] > 0.0) return dist.labels[i];
  }
  return dist.labels.back();
}

}  // namespace predset
