#include "predset/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace predset {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::ColumnSumOutOfTolerance: return "ColumnSumOutOfTolerance";
    case ErrorCode::EmptyColumnWithoutSmoothing: return "EmptyColumnWithoutSmoothing";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::CandidateAlreadyInSet: return "CandidateAlreadyInSet";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::LabelCountExceedsBruteForceLimit: return "LabelCountExceedsBruteForceLimit";
    case ErrorCode::EmptyCalibration: return "EmptyCalibration";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InsufficientCalibrationData: return "InsufficientCalibrationData";
    case ErrorCode::AlreadyClique: return "AlreadyClique";
    case ErrorCode::GraphTooLarge: return "GraphTooLarge";
    case ErrorCode::TooManyClassesForHypercube: return "TooManyClassesForHypercube";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::ScoreSumOutOfTolerance: return "ScoreSumOutOfTolerance";
    case ErrorCode::SelfLoopRejected: return "SelfLoopRejected";
    case ErrorCode::DuplicateEdgeRejected: return "DuplicateEdgeRejected";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::AuditFailure: return "AuditFailure";
  }
  return "Unknown";
}

ProbVector ProbVector::make(std::vector<double> values, double tolerance) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "probability vector is empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFiniteEntry, "entry " + std::to_string(i) + " is not finite");
    }
    if (v < 0.0) {
      throw Error(ErrorCode::NegativeEntry, "entry " + std::to_string(i) + " is negative");
    }
    sum += v;
  }
  const double gap = std::abs(sum - 1.0);
  if (gap > std::max(tolerance, kExactSumTolerance)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "entries sum to " << sum;
    throw Error(ErrorCode::ScoreSumOutOfTolerance, msg.str());
  }
  if (gap > kExactSumTolerance) {
    for (auto& v : values) v /= sum;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > 1.0) {
      throw Error(ErrorCode::InvalidArgument, "entry " + std::to_string(i) + " exceeds 1");
    }
  }
  return ProbVector(std::move(values));
}

ProbVector ProbVector::uniform(std::size_t label_count) {
  if (label_count == 0) throw Error(ErrorCode::InvalidArgument, "label count is zero");
  return ProbVector(std::vector<double>(label_count, 1.0 / static_cast<double>(label_count)));
}

ProbVector ProbVector::point_mass(std::size_t label_count, LabelId label) {
  if (label >= label_count) throw Error(ErrorCode::LabelOutOfRange, "point mass label");
  std::vector<double> v(label_count, 0.0);
  v[label] = 1.0;
  return ProbVector(std::move(v));
}

ConfusionMatrix ConfusionMatrix::identity(std::size_t label_count) {
  std::vector<double> e(label_count * label_count, 0.0);
  for (std::size_t i = 0; i < label_count; ++i) e[i * label_count + i] = 1.0;
  return ConfusionMatrix(label_count, std::move(e));
}

ConfusionMatrix validate_confusion(const std::vector<std::vector<double>>& rows, double tolerance) {
  const std::size_t l = rows.size();
  if (l == 0) throw Error(ErrorCode::InvalidArgument, "confusion matrix is empty");
  std::vector<double> e(l * l);
  for (std::size_t r = 0; r < l; ++r) {
    if (rows[r].size() != l) {
      throw Error(ErrorCode::InvalidArgument, "confusion matrix is not square (row " +
                                                  std::to_string(r) + ")");
    }
    for (std::size_t c = 0; c < l; ++c) {
      const double v = rows[r][c];
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteEntry,
                    "entry (" + std::to_string(r) + "," + std::to_string(c) + ")");
      }
      if (v < 0.0) {
        throw Error(ErrorCode::NegativeEntry,
                    "entry (" + std::to_string(r) + "," + std::to_string(c) + ")");
      }
      e[r * l + c] = v;
    }
  }
  for (std::size_t c = 0; c < l; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < l; ++r) sum += e[r * l + c];
    const double gap = std::abs(sum - 1.0);
    if (gap > std::max(tolerance, kExactSumTolerance)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "column " << c << " sums to " << sum;
      throw Error(ErrorCode::ColumnSumOutOfTolerance, msg.str());
    }
    if (gap > kExactSumTolerance) {
      for (std::size_t r = 0; r < l; ++r) e[r * l + c] /= sum;
    }
  }
  return ConfusionMatrix(l, std::move(e));
}

ConfusionMatrix normalize_counts(const std::vector<std::vector<std::uint64_t>>& counts,
                                 double smoothing) {
  if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) {
    throw Error(ErrorCode::InvalidArgument, "smoothing must be finite and nonnegative");
  }
  const std::size_t l = counts.size();
  if (l == 0) throw Error(ErrorCode::InvalidArgument, "count matrix is empty");
  for (const auto& row : counts) {
    if (row.size() != l) throw Error(ErrorCode::InvalidArgument, "count matrix is not square");
  }
  std::vector<std::vector<double>> rows(l, std::vector<double>(l));
  for (std::size_t c = 0; c < l; ++c) {
    double colsum = 0.0;
    for (std::size_t r = 0; r < l; ++r) colsum += static_cast<double>(counts[r][c]);
    const double denom = colsum + static_cast<double>(l) * smoothing;
    if (denom == 0.0) {
      throw Error(ErrorCode::EmptyColumnWithoutSmoothing,
                  "column " + std::to_string(c) + " has no observations");
    }
    for (std::size_t r = 0; r < l; ++r) {
      rows[r][c] = (static_cast<double>(counts[r][c]) + smoothing) / denom;
    }
  }
  return validate_confusion(rows, kExactSumTolerance);
}

PredictionSet::PredictionSet(std::initializer_list<LabelId> members)
    : PredictionSet(std::vector<LabelId>(members)) {}

PredictionSet::PredictionSet(std::vector<LabelId> members) : members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  if (std::adjacent_find(members_.begin(), members_.end()) != members_.end()) {
    throw Error(ErrorCode::InvalidArgument, "prediction set has duplicate members");
  }
}

PredictionSet PredictionSet::full(std::size_t label_count) {
  std::vector<LabelId> m(label_count);
  std::iota(m.begin(), m.end(), LabelId{0});
  return PredictionSet(std::move(m));
}

PredictionSet PredictionSet::from_mask(std::uint64_t mask) {
  std::vector<LabelId> m;
  for (LabelId y = 0; mask != 0; ++y, mask >>= 1) {
    if (mask & 1U) m.push_back(y);
  }
  return PredictionSet(std::move(m));
}

bool PredictionSet::contains(LabelId y) const {
  return std::binary_search(members_.begin(), members_.end(), y);
}

std::string PredictionSet::to_display() const {
  std::string out = "{";
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(members_[i] + 1);
  }
  return out + "}";
}

std::string PredictionSet::to_field() const {
  std::string out;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (i) out += " ";
    out += std::to_string(members_[i]);
  }
  return out;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Calib: return "calib";
    case Split::Test: return "test";
  }
  return "unknown";
}

void Dataset::validate() const {
  if (label_count < 2) throw Error(ErrorCode::InvalidArgument, "dataset needs at least 2 labels");
  for (const auto& r : records) {
    if (r.scores.size() != label_count) {
      throw Error(ErrorCode::ArityMismatch, "record '" + r.id + "' has " +
                                                std::to_string(r.scores.size()) + " scores");
    }
    if (r.true_label >= label_count) {
      throw Error(ErrorCode::LabelOutOfRange, "record '" + r.id + "' true label");
    }
    if (r.human_pred && *r.human_pred >= label_count) {
      throw Error(ErrorCode::LabelOutOfRange, "record '" + r.id + "' human prediction");
    }
  }
}

std::vector<std::size_t> Dataset::indices_of(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = splits.find(records[i].id);
    if (it != splits.end() && it->second == split) out.push_back(i);
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::string_view key)
    : master_seed_(master_seed),
      key_(key),
      engine_(splitmix64(master_seed ^ splitmix64(fnv1a64(key)))) {}

RngStream RngStream::child(std::string_view suffix) const {
  std::string k = key_;
  k += '/';
  k += suffix;
  return RngStream(master_seed_, k);
}

double RngStream::uniform() {
  const double u = std::generate_canonical<double, 64>(engine_);
  return u < 1.0 ? u : std::nextafter(1.0, 0.0);
}

double RngStream::normal() { return normal_(engine_); }

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "uniform_index over empty range");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

}  // namespace predset
