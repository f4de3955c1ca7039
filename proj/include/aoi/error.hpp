#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aoi {

enum class ErrorKind {
  MissingKey,
  InvalidConfig,
  NonPositiveDefinite,
  AssumptionViolation,
  DimensionMismatch,
  DomainError,
  NoConvergence,
  RankDeficient,
  UnstableClosedLoop,
  InfeasibleCapacity,
  DegenerateBracket,
  Io,
};

inline std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit code for the command line front end: 1 config, 2 numeric, 3 IO.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingKey:
    case ErrorKind::InvalidConfig:
    case ErrorKind::NonPositiveDefinite:
    case ErrorKind::AssumptionViolation:
      return 1;
    case ErrorKind::Io:
      return 3;
    default:
      return 2;
  }
}

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingKey: return "MissingKey";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NonPositiveDefinite: return "NonPositiveDefinite";
    case ErrorKind::AssumptionViolation: return "AssumptionViolation";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::UnstableClosedLoop: return "UnstableClosedLoop";
    case ErrorKind::InfeasibleCapacity: return "InfeasibleCapacity";
    case ErrorKind::DegenerateBracket: return "DegenerateBracket";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace aoi
