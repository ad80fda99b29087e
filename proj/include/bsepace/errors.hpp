#pragma once

#include <stdexcept>
#include <string>

namespace bsepace {

enum class ErrorKind {
  InvalidArgument,
  InvalidDistribution,
  QuadratureNonConvergence,
  PaymentExceedsBid,
  Infeasible,
  EmptyFrontier,
  DegenerateDistribution,
  UnboundedPotential,
  MissingSeparation,
  ConfigError,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidDistribution: return "InvalidDistribution";
    case ErrorKind::QuadratureNonConvergence: return "QuadratureNonConvergence";
    case ErrorKind::PaymentExceedsBid: return "PaymentExceedsBid";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::EmptyFrontier: return "EmptyFrontier";
    case ErrorKind::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorKind::UnboundedPotential: return "UnboundedPotential";
    case ErrorKind::MissingSeparation: return "MissingSeparation";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Single exception type for the library; `kind()` tells callers which contract failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace bsepace
