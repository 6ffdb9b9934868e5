#include "intervene/error.hpp"

namespace intervene {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::InvalidIndex: return "InvalidIndex";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::DuplicateEdge: return "DuplicateEdge";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ValueOutOfRange: return "ValueOutOfRange";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::ParseError: return "ParseError";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::EmptyRegime: return "EmptyRegime";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::RootHasNoPredictor: return "RootHasNoPredictor";
    case Errc::LedgerUninitialized: return "LedgerUninitialized";
    case Errc::ValueNotOnGrid: return "ValueNotOnGrid";
    case Errc::UnscoredCandidate: return "UnscoredCandidate";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ProbeModeUnavailable: return "ProbeModeUnavailable";
    case Errc::UnknownEnvironment: return "UnknownEnvironment";
    case Errc::UnknownPolicy: return "UnknownPolicy";
    case Errc::DegenerateVariance: return "DegenerateVariance";
    case Errc::MissingLogs: return "MissingLogs";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace intervene
