#pragma once

// Domain types shared by every module: label ids, probability vectors,
// column-stochastic confusion matrices, prediction sets, datasets and
// keyed deterministic random streams.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "predset/error.hpp"

namespace predset {

// Zero-based label index. Display code adds one to match the usual {1..L}.
using LabelId = std::size_t;

// Sums are considered exact within this bound; anything further off but
// inside the caller's tolerance gets renormalized.
inline constexpr double kExactSumTolerance = 1e-9;
// Tolerance for data that went through rounding (ingested files, published
// confusion matrices).
inline constexpr double kIngestSumTolerance = 0.02;

class ProbVector {
 public:
  ProbVector() = default;

  // Validates entries in [0,1] and a unit sum. Sums within `tolerance` of one
  // (but not within kExactSumTolerance) are renormalized; otherwise throws
  // ScoreSumOutOfTolerance.
  static ProbVector make(std::vector<double> values, double tolerance = kExactSumTolerance);
  static ProbVector uniform(std::size_t label_count);
  static ProbVector point_mass(std::size_t label_count, LabelId label);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](LabelId y) const { return values_[y]; }
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const ProbVector&, const ProbVector&) = default;

 private:
  explicit ProbVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

// Column-stochastic: at(predicted, truth) = P(expert predicts `predicted` |
// true label `truth`). Every column sums to one.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;

  std::size_t size() const noexcept { return label_count_; }
  double at(LabelId predicted, LabelId truth) const {
    return entries_[predicted * label_count_ + truth];
  }
  // Row-major view, entries()[predicted * L + truth].
  std::span<const double> entries() const noexcept { return entries_; }
  static ConfusionMatrix identity(std::size_t label_count);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  friend ConfusionMatrix validate_confusion(const std::vector<std::vector<double>>&, double);
  ConfusionMatrix(std::size_t l, std::vector<double> e) : label_count_(l), entries_(std::move(e)) {}
  std::size_t label_count_ = 0;
  std::vector<double> entries_;
};

// `rows[predicted][truth]`. Columns within `tolerance` of one are
// renormalized, never columns outside it.
ConfusionMatrix validate_confusion(const std::vector<std::vector<double>>& rows,
                                   double tolerance = kExactSumTolerance);

// counts[predicted][truth]; column y becomes (counts[.][y] + s) / (colsum + L*s).
ConfusionMatrix normalize_counts(const std::vector<std::vector<std::uint64_t>>& counts,
                                 double smoothing = 0.0);

// Sorted, duplicate-free subset of labels.
class PredictionSet {
 public:
  PredictionSet() = default;
  PredictionSet(std::initializer_list<LabelId> members);
  explicit PredictionSet(std::vector<LabelId> members);

  static PredictionSet full(std::size_t label_count);
  static PredictionSet from_mask(std::uint64_t mask);

  std::size_t size() const noexcept { return members_.size(); }
  bool empty() const noexcept { return members_.empty(); }
  bool contains(LabelId y) const;
  LabelId front() const { return members_.front(); }
  auto begin() const noexcept { return members_.begin(); }
  auto end() const noexcept { return members_.end(); }
  std::span<const LabelId> members() const noexcept { return members_; }

  // "{1,2,3}" with one-based labels.
  std::string to_display() const;
  // "0 1 2" zero-based, used in CSV cells.
  std::string to_field() const;

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
  friend auto operator<=>(const PredictionSet&, const PredictionSet&) = default;

 private:
  std::vector<LabelId> members_;
};

enum class Split { Train, Calib, Test };
std::string_view to_string(Split split);

struct InstanceRecord {
  std::string id;
  ProbVector scores;
  LabelId true_label = 0;
  std::optional<LabelId> human_pred;
  std::optional<double> noise_tag;
};

struct Dataset {
  std::size_t label_count = 0;
  std::vector<InstanceRecord> records;
  std::map<std::string, Split> splits;

  // Throws on label-count disagreement or out-of-range labels.
  void validate() const;
  std::vector<std::size_t> indices_of(Split split) const;
};

// Deterministic random stream keyed by (master seed, key). Two streams built
// from the same pair produce identical draw sequences.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view key);

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  const std::string& key() const noexcept { return key_; }

  RngStream child(std::string_view suffix) const;

  double uniform();                       // [0,1)
  double normal();                        // N(0,1)
  std::size_t uniform_index(std::size_t n);  // [0,n)
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t master_seed_;
  std::string key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

std::uint64_t fnv1a64(std::string_view text);

}  // namespace predset
