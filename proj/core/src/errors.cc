#include "zdshape/errors.hpp"

namespace zdshape {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDomain: return "Domain";
    case ErrorCode::kSingularPartition: return "SingularPartition";
    case ErrorCode::kUnreachable: return "Unreachable";
    case ErrorCode::kInputSingularity: return "InputSingularity";
    case ErrorCode::kStructureError: return "StructureError";
    case ErrorCode::kNoEquilibrium: return "NoEquilibrium";
    case ErrorCode::kEscapedDomain: return "EscapedDomain";
    case ErrorCode::kNotPeriodic: return "NotPeriodic";
    case ErrorCode::kAllInfeasible: return "AllInfeasible";
    case ErrorCode::kUncontrollable: return "Uncontrollable";
    case ErrorCode::kRiccatiDiverged: return "RiccatiDiverged";
    case ErrorCode::kDegenerateOrbit: return "DegenerateOrbit";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

bool IsInfeasibility(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDomain:
    case ErrorCode::kUnreachable:
    case ErrorCode::kNoEquilibrium:
    case ErrorCode::kAllInfeasible:
    case ErrorCode::kEscapedDomain:
      return true;
    default:
      return false;
  }
}

}  // namespace zdshape
