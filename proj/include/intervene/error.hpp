#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace intervene {

enum class Errc {
  CycleDetected,
  InvalidIndex,
  SelfLoop,
  DuplicateEdge,
  InvalidArgument,
  ValueOutOfRange,
  NonFiniteState,
  ParseError,
  MissingColumn,
  EmptyRegime,
  EmptyBatch,
  RootHasNoPredictor,
  LedgerUninitialized,
  ValueNotOnGrid,
  UnscoredCandidate,
  LengthMismatch,
  ProbeModeUnavailable,
  UnknownEnvironment,
  UnknownPolicy,
  DegenerateVariance,
  MissingLogs,
  ConfigError,
  IoError,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace intervene
