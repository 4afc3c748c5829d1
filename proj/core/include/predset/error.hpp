#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace predset {

enum class ErrorCode {
  InvalidArgument,
  NegativeEntry,
  NonFiniteEntry,
  ColumnSumOutOfTolerance,
  EmptyColumnWithoutSmoothing,
  LabelOutOfRange,
  CandidateAlreadyInSet,
  EmptySet,
  LabelCountExceedsBruteForceLimit,
  EmptyCalibration,
  LengthMismatch,
  InsufficientCalibrationData,
  AlreadyClique,
  GraphTooLarge,
  TooManyClassesForHypercube,
  NonFiniteLoss,
  SizeMismatch,
  MalformedHeader,
  ArityMismatch,
  ScoreSumOutOfTolerance,
  SelfLoopRejected,
  DuplicateEdgeRejected,
  MalformedInput,
  IoFailure,
  ConfigError,
  AuditFailure,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a code so callers (and tests)
// can branch on the kind of failure without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace predset
