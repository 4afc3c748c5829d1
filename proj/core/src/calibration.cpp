#include "predset/calibration.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "predset/optimizer.hpp"

namespace predset {

TopKCalibrator::TopKCalibrator(std::vector<std::vector<double>> edges,
                               std::vector<std::vector<double>> values)
    : edges_(std::move(edges)), values_(std::move(values)) {
  if (edges_.empty() || edges_.size() != values_.size()) {
    throw Error(ErrorCode::InvalidArgument, "calibrator needs one edge/value array per rank");
  }
  for (std::size_t j = 0; j < edges_.size(); ++j) {
    const auto& e = edges_[j];
    const auto& v = values_[j];
    if (v.empty() || e.size() != v.size() + 1) {
      throw Error(ErrorCode::InvalidArgument,
                  "rank " + std::to_string(j) + ": need B+1 edges for B values");
    }
    for (std::size_t b = 1; b < e.size(); ++b) {
      if (!(e[b] > e[b - 1])) {
        throw Error(ErrorCode::InvalidArgument,
                    "rank " + std::to_string(j) + ": edges not strictly increasing");
      }
    }
    for (double x : v) {
      if (!(x >= 0.0 && x <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument,
                    "rank " + std::to_string(j) + ": value outside [0,1]");
      }
    }
  }
}

std::size_t TopKCalibrator::bin_of(std::size_t rank, double score) const {
  const auto& e = edges_.at(rank);
  // Interior edges only; scores beyond the outer edges clamp to the end bins.
  const auto it = std::upper_bound(e.begin() + 1, e.end() - 1, score);
  return static_cast<std::size_t>(it - (e.begin() + 1));
}

TopKCalibrator fit_topk(std::span<const ProbVector> scores, std::span<const LabelId> labels,
                        std::size_t k, std::size_t bins) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
  }
  if (k == 0 || bins == 0) throw Error(ErrorCode::InvalidArgument, "k and bins must be positive");
  const std::size_t n = scores.size();
  if (n < bins || n == 0) {
    throw Error(ErrorCode::InsufficientCalibrationData,
                std::to_string(n) + " samples for " + std::to_string(bins) + " bins");
  }
  const std::size_t l = scores[0].size();
  if (k > l) throw Error(ErrorCode::InvalidArgument, "k exceeds the label count");

  // per rank: (raw score of the rank-j label, whether it is the true label)
  std::vector<std::vector<std::pair<double, bool>>> per_rank(k);
  for (auto& r : per_rank) r.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (scores[i].size() != l) throw Error(ErrorCode::ArityMismatch, "calibration sample arity");
    const auto ranking = rank_labels(scores[i]);
    for (std::size_t j = 0; j < k; ++j) {
      per_rank[j].emplace_back(scores[i][ranking[j]], ranking[j] == labels[i]);
    }
  }

  std::vector<std::vector<double>> all_edges(k);
  std::vector<std::vector<double>> all_values(k);
  for (std::size_t j = 0; j < k; ++j) {
    auto& samples = per_rank[j];
    std::sort(samples.begin(), samples.end());
    std::vector<double> edges{0.0};
    for (std::size_t b = 1; b < bins; ++b) {
      const std::size_t cut = b * n / bins;  // first index of chunk b
      const double lo = samples[cut - 1].first;
      const double hi = samples[cut].first;
      if (lo < hi) {
        const double mid = lo + (hi - lo) / 2.0;
        if (mid > edges.back()) edges.push_back(mid);
      }
    }
    edges.push_back(std::max(1.0, samples.back().first));
    if (!(edges.back() > edges[edges.size() - 2])) edges.pop_back();  // only possible if a cut hit 1

    std::vector<std::size_t> hits(edges.size() - 1, 0);
    std::vector<std::size_t> totals(edges.size() - 1, 0);
    std::size_t bin = 0;
    for (const auto& [s, hit] : samples) {
      while (bin + 1 < totals.size() && s >= edges[bin + 1]) ++bin;
      ++totals[bin];
      hits[bin] += hit ? 1 : 0;
    }
    std::vector<double> values(totals.size());
    for (std::size_t b = 0; b < totals.size(); ++b) {
      values[b] = totals[b] ? static_cast<double>(hits[b]) / static_cast<double>(totals[b]) : 0.0;
    }
    all_edges[j] = std::move(edges);
    all_values[j] = std::move(values);
  }
  return TopKCalibrator(std::move(all_edges), std::move(all_values));
}

ProbVector apply_topk(const TopKCalibrator& calibrator, const ProbVector& f) {
  const std::size_t l = f.size();
  const std::size_t k = calibrator.k();
  if (l < k) throw Error(ErrorCode::InvalidArgument, "fewer labels than calibrated ranks");
  const auto ranking = rank_labels(f);

  std::vector<double> top(k);
  for (std::size_t j = 0; j < k; ++j) top[j] = calibrator.recalibrated(j, f[ranking[j]]);
  for (std::size_t j = k - 1; j-- > 0;) top[j] = std::max(top[j], top[j + 1]);

  double top_mass = 0.0;
  for (double v : top) top_mass += v;
  if (top_mass == 0.0) return f;

  double tail_mass = 0.0;
  for (std::size_t j = k; j < l; ++j) tail_mass += f[ranking[j]];

  std::vector<double> out(l, 0.0);
  double scale_top = 1.0;
  double scale_tail = 0.0;
  if (top_mass >= 1.0 || tail_mass == 0.0) {
    scale_top = 1.0 / top_mass;
  } else {
    scale_tail = (1.0 - top_mass) / tail_mass;
    const double tail_max = f[ranking[k]];
    if (tail_max * scale_tail > top[k - 1]) {
      // Cap the tail at the last top-k value, then renormalize everything.
      scale_tail = top[k - 1] / tail_max;
      const double total = top_mass + scale_tail * tail_mass;
      scale_top = 1.0 / total;
      scale_tail /= total;
    }
  }
  for (std::size_t j = 0; j < k; ++j) out[ranking[j]] = top[j] * scale_top;
  // rounding in the capped case must not lift a tail label above rank k
  const double ceiling = out[ranking[k - 1]];
  for (std::size_t j = k; j < l; ++j) out[ranking[j]] = std::min(f[ranking[j]] * scale_tail, ceiling);
  double sum = 0.0;
  for (double v : out) sum += v;
  for (auto& v : out) v /= sum;
  return ProbVector::make(std::move(out));
}

}  // namespace predset
