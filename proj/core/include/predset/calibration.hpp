#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "predset/core.hpp"

namespace predset {

// Histogram binning of the scores at the top k rank positions. Rank j has its
// own bins: edges(j) is strictly increasing with edges(j).size() ==
// values(j).size() + 1, and values(j)[b] is the recalibrated probability that
// the rank-j label is correct when its raw score falls in bin b.
class TopKCalibrator {
 public:
  TopKCalibrator() = default;
  TopKCalibrator(std::vector<std::vector<double>> edges, std::vector<std::vector<double>> values);

  std::size_t k() const noexcept { return edges_.size(); }
  std::span<const double> edges(std::size_t rank) const { return edges_.at(rank); }
  std::span<const double> values(std::size_t rank) const { return values_.at(rank); }

  std::size_t bin_of(std::size_t rank, double score) const;
  double recalibrated(std::size_t rank, double score) const {
    return values_.at(rank)[bin_of(rank, score)];
  }

  friend bool operator==(const TopKCalibrator&, const TopKCalibrator&) = default;

 private:
  std::vector<std::vector<double>> edges_;
  std::vector<std::vector<double>> values_;
};

inline constexpr std::size_t kDefaultTopK = 5;
inline constexpr std::size_t kDefaultCalibrationBins = 10;

// Equal-frequency bins per rank position. Neighbouring bins whose boundary
// would fall between equal scores are merged, so a rank can end up with
// fewer than `bins` bins on heavily tied data.
TopKCalibrator fit_topk(std::span<const ProbVector> scores, std::span<const LabelId> labels,
                        std::size_t k = kDefaultTopK, std::size_t bins = kDefaultCalibrationBins);

// Replaces the top-k scores by their bin values (made nonincreasing along the
// original ranking) and rescales the tail to restore a unit sum. The output is
// nonincreasing along the input's ranking and the input's top-k labels remain
// a valid top-k. If every recalibrated top-k value is zero the input is
// returned unchanged.
ProbVector apply_topk(const TopKCalibrator& calibrator, const ProbVector& f);

}  // namespace predset
