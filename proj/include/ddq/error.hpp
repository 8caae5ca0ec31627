#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ddq {

enum class ErrorKind {
  // data problems
  ShapeMismatch,
  NonFiniteEntry,
  RankTooLarge,
  ZeroColumn,
  ZeroMatrix,
  EmptyMask,
  NotSymmetric,
  UnknownExample,
  ParseError,
  DimensionMismatch,
  InvalidArgument,
  // numerical failures
  NotPositiveDefinite,
  SingularOperator,
  ConvergenceFailure,
  // filesystem
  IoError,
};

enum class ErrorCategory { Data, Numerical, Io };

constexpr ErrorCategory category_of(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NotPositiveDefinite:
    case ErrorKind::SingularOperator:
    case ErrorKind::ConvergenceFailure:
      return ErrorCategory::Numerical;
    case ErrorKind::IoError:
      return ErrorCategory::Io;
    default:
      return ErrorCategory::Data;
  }
}

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorKind::RankTooLarge: return "RankTooLarge";
    case ErrorKind::ZeroColumn: return "ZeroColumn";
    case ErrorKind::ZeroMatrix: return "ZeroMatrix";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::UnknownExample: return "UnknownExample";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::SingularOperator: return "SingularOperator";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; the kind selects the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace ddq
