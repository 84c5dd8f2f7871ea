#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace posetlim {

enum class ErrorCode {
  SelfLoop,
  Cycle,
  OutOfRange,
  NotClosed,
  Unsupported,
  Overflow,
  IncompatiblePartition,
  NotLinearExtension,
  NotConsecutive,
  ValuesOutOfRange,
  AxiomViolation,
  InvalidMeasures,
  NotDisjoint,
  TooLarge,
  InvalidWitness,
  ForwardViolation,
  StrategyInconclusive,
  TooManyParts,
  TruthUnavailable,
  BudgetExceeded,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::Cycle: return "Cycle";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NotClosed: return "NotClosed";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::IncompatiblePartition: return "IncompatiblePartition";
    case ErrorCode::NotLinearExtension: return "NotLinearExtension";
    case ErrorCode::NotConsecutive: return "NotConsecutive";
    case ErrorCode::ValuesOutOfRange: return "ValuesOutOfRange";
    case ErrorCode::AxiomViolation: return "AxiomViolation";
    case ErrorCode::InvalidMeasures: return "InvalidMeasures";
    case ErrorCode::NotDisjoint: return "NotDisjoint";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::InvalidWitness: return "InvalidWitness";
    case ErrorCode::ForwardViolation: return "ForwardViolation";
    case ErrorCode::StrategyInconclusive: return "StrategyInconclusive";
    case ErrorCode::TooManyParts: return "TooManyParts";
    case ErrorCode::TruthUnavailable: return "TruthUnavailable";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Domain error: a violated precondition of a library operation.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed input file (syntax, shape). Distinct from Error so the CLI can
/// map it to a different exit status.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace posetlim
