#include "cablelift/error.hpp"

namespace cablelift {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::DegenerateForce: return "DegenerateForce";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::SingularMap: return "SingularMap";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::InfeasiblePair: return "InfeasiblePair";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::BadGeometry: return "BadGeometry";
    case ErrorCode::NoIntersection: return "NoIntersection";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadData: return "BadData";
    case ErrorCode::PresetUnavailable: return "PresetUnavailable";
    case ErrorCode::AbortedRun: return "AbortedRun";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace cablelift
