#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ptap {

enum class ErrorCode {
  InvalidInput,
  ParseError,
  MissingMirror,
  DanglingReference,
  NonPositiveAttribute,
  AttributeMismatch,
  DuplicateOD,
  UnknownLink,
  UnknownNode,
  NonPositivePeriod,
  InvalidFlow,
  Unreachable,
  ZeroTSTT,
  EmptyPath,
  InsufficientData,
  FitDiverged,
  LengthMismatch,
  EmptyInput,
  DegenerateOffset,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingMirror: return "MissingMirror";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::NonPositiveAttribute: return "NonPositiveAttribute";
    case ErrorCode::AttributeMismatch: return "AttributeMismatch";
    case ErrorCode::DuplicateOD: return "DuplicateOD";
    case ErrorCode::UnknownLink: return "UnknownLink";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::NonPositivePeriod: return "NonPositivePeriod";
    case ErrorCode::InvalidFlow: return "InvalidFlow";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::ZeroTSTT: return "ZeroTSTT";
    case ErrorCode::EmptyPath: return "EmptyPath";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::FitDiverged: return "FitDiverged";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateOffset: return "DegenerateOffset";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// message always starts with the code name so diagnostics stay greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when at least one OD pair has no path. Lists every such pair.
class UnreachableError : public Error {
 public:
  using OdPair = std::pair<long long, long long>;

  explicit UnreachableError(std::vector<OdPair> pairs)
      : Error(ErrorCode::Unreachable, describe(pairs)), pairs_(std::move(pairs)) {}

  const std::vector<OdPair>& pairs() const noexcept { return pairs_; }

 private:
  static std::string describe(const std::vector<OdPair>& pairs) {
    std::string s;
    for (const auto& [o, d] : pairs) {
      if (!s.empty()) s += ", ";
      s += "(" + std::to_string(o) + " -> " + std::to_string(d) + ")";
    }
    return s;
  }

  std::vector<OdPair> pairs_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

}  // namespace ptap
