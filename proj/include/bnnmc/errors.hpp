#pragma once

#include <stdexcept>
#include <string>

namespace bnnmc {

enum class ErrorCode {
  NonPositiveScale,
  NonPSDCovariance,
  EmptyMixture,
  NegativeWeight,
  CyclicHierarchy,
  DimensionMismatch,
  DomainError,
  NonFiniteGradient,
  DivergenceDetected,
  RequiresFullBatch,
  EmptyArchive,
  EmptyChain,
  EmptyInput,
  DuplicateTemperature,
  DegenerateSplit,
  MissingFile,
  ParseError,
  UnknownColumn,
  FormatMismatch,
  InvalidConfig,
  IoError,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::NonPSDCovariance: return "NonPSDCovariance";
    case ErrorCode::EmptyMixture: return "EmptyMixture";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::CyclicHierarchy: return "CyclicHierarchy";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::RequiresFullBatch: return "RequiresFullBatch";
    case ErrorCode::EmptyArchive: return "EmptyArchive";
    case ErrorCode::EmptyChain: return "EmptyChain";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DuplicateTemperature: return "DuplicateTemperature";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::FormatMismatch: return "FormatMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

// All library failures surface as this exception; code() lets callers map
// error classes to exit codes without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

inline void require(bool condition, ErrorCode code, const std::string& detail) {
  if (!condition) fail(code, detail);
}

}  // namespace bnnmc
