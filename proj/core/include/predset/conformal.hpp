#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "predset/core.hpp"

namespace predset {

enum class ScoreKind { Naive, Aps };
std::string_view to_string(ScoreKind kind);

// 1 - f_y.
double naive_score(const ProbVector& f, LabelId y);
// Sum of every f_{y'} with f_{y'} <= f_y, ties (and y itself) included.
double aps_score(const ProbVector& f, LabelId y);
double nonconformity(const ProbVector& f, LabelId y, ScoreKind kind);
std::vector<double> nonconformity_all(const ProbVector& f, ScoreKind kind);

struct ConformalThreshold {
  // +inf admits every label, -inf admits none (the singleton fallback applies).
  double q_hat = 0.0;
  double alpha = 0.0;
  std::size_t calibration_size = 0;
};

// q_hat is the j-th smallest score, j = ceil((m+1)(1-alpha)) one-based.
ConformalThreshold calibration_quantile(std::span<const double> scores, double alpha);

// Labels with score <= q_hat; if none qualify, the single label with the
// lowest score (ties to the smaller index).
PredictionSet conformal_set(const ProbVector& f, const ConformalThreshold& threshold,
                            ScoreKind kind);

double coverage(std::span<const PredictionSet> sets, std::span<const LabelId> labels);

}  // namespace predset
