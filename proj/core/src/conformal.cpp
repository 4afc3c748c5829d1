#include "predset/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace predset {

std::string_view to_string(ScoreKind kind) {
  return kind == ScoreKind::Naive ? "naive" : "aps";
}

double naive_score(const ProbVector& f, LabelId y) {
  if (y >= f.size()) throw Error(ErrorCode::LabelOutOfRange, "naive score label");
  return 1.0 - f[y];
}

double aps_score(const ProbVector& f, LabelId y) {
  if (y >= f.size()) throw Error(ErrorCode::LabelOutOfRange, "aps score label");
  // Shares the accumulation order with nonconformity_all so calibration and
  // set construction see bit-identical scores.
  return nonconformity_all(f, ScoreKind::Aps)[y];
}

double nonconformity(const ProbVector& f, LabelId y, ScoreKind kind) {
  return kind == ScoreKind::Naive ? naive_score(f, y) : aps_score(f, y);
}

std::vector<double> nonconformity_all(const ProbVector& f, ScoreKind kind) {
  std::vector<double> out(f.size());
  if (kind == ScoreKind::Naive) {
    for (LabelId y = 0; y < f.size(); ++y) out[y] = 1.0 - f[y];
    return out;
  }
  // Sort once and accumulate tie groups so all ties share one score.
  std::vector<LabelId> order(f.size());
  for (LabelId y = 0; y < f.size(); ++y) order[y] = y;
  std::sort(order.begin(), order.end(), [&](LabelId a, LabelId b) { return f[a] < f[b]; });
  double running = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    double group = 0.0;
    while (j < order.size() && f[order[j]] == f[order[i]]) group += f[order[j++]];
    running += group;
    for (std::size_t t = i; t < j; ++t) out[order[t]] = running;
    i = j;
  }
  return out;
}

ConformalThreshold calibration_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw Error(ErrorCode::EmptyCalibration, "no calibration scores");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0,1]");
  }
  const std::size_t m = scores.size();
  ConformalThreshold t;
  t.alpha = alpha;
  t.calibration_size = m;
  // Guard the ceiling against representation error, e.g. 5 * 0.6 = 3.0000000000000004.
  const double raw = static_cast<double>(m + 1) * (1.0 - alpha);
  const double j = std::ceil(raw - 1e-9 * static_cast<double>(m + 1));
  if (j <= 0.0) {
    t.q_hat = -std::numeric_limits<double>::infinity();
  } else if (j > static_cast<double>(m)) {
    t.q_hat = std::numeric_limits<double>::infinity();
  } else {
    std::vector<double> sorted(scores.begin(), scores.end());
    const auto idx = static_cast<std::size_t>(j) - 1;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(idx),
                     sorted.end());
    t.q_hat = sorted[idx];
  }
  return t;
}

PredictionSet conformal_set(const ProbVector& f, const ConformalThreshold& threshold,
                            ScoreKind kind) {
  const auto scores = nonconformity_all(f, kind);
  std::vector<LabelId> members;
  for (LabelId y = 0; y < scores.size(); ++y) {
    if (scores[y] <= threshold.q_hat) members.push_back(y);
  }
  if (members.empty()) {
    LabelId best = 0;
    for (LabelId y = 1; y < scores.size(); ++y) {
      if (scores[y] < scores[best]) best = y;
    }
    members.push_back(best);
  }
  return PredictionSet(std::move(members));
}

double coverage(std::span<const PredictionSet> sets, std::span<const LabelId> labels) {
  if (sets.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(sets.size()) + " sets vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  if (sets.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) hits += sets[i].contains(labels[i]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(sets.size());
}

}  // namespace predset
