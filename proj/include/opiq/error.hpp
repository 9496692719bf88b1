// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace opiq {

enum class ErrorKind {
  EmptyRatings,
  InvalidLevel,
  OutOfRange,
  DegenerateFit,
  InvalidSigma,
  InvalidDistribution,
  InvalidScale,
  InvalidLabels,
  ShapeError,
  NumericError,
  ConfigError,
  ScaleMismatch,
  ParseError,
  ValidationError,
  IoError,
  FormatError,
  UndefinedCorrelation,
  NoResults,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::EmptyRatings: return "EmptyRatings";
    case ErrorKind::InvalidLevel: return "InvalidLevel";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::InvalidSigma: return "InvalidSigma";
    case ErrorKind::InvalidDistribution: return "InvalidDistribution";
    case ErrorKind::InvalidScale: return "InvalidScale";
    case ErrorKind::InvalidLabels: return "InvalidLabels";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::NumericError: return "NumericError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ScaleMismatch: return "ScaleMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::UndefinedCorrelation: return "UndefinedCorrelation";
    case ErrorKind::NoResults: return "NoResults";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  const char* kind_name() const noexcept { return error_kind_name(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool cond, ErrorKind kind, const std::string& message) {
  if (!cond) raise(kind, message);
}

}  // namespace opiq
