#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flatopt {

enum class ErrorKind {
  NonPositiveVariance,
  MissingFisherData,
  NonFiniteValue,
  ShapeMismatch,
  DimensionTooLarge,
  IntegratorFailure,
  InvalidDelta,
  ConfigError,
  UnknownSuite,
  MissingRun,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorKind::MissingFisherData: return "MissingFisherData";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorKind::IntegratorFailure: return "IntegratorFailure";
    case ErrorKind::InvalidDelta: return "InvalidDelta";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::UnknownSuite: return "UnknownSuite";
    case ErrorKind::MissingRun: return "MissingRun";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace flatopt
