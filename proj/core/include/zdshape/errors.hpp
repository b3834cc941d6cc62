#pragma once

#include <stdexcept>
#include <string>

namespace zdshape {

enum class ErrorCode {
  kDomain,
  kSingularPartition,
  kUnreachable,
  kInputSingularity,
  kStructureError,
  kNoEquilibrium,
  kEscapedDomain,
  kNotPeriodic,
  kAllInfeasible,
  kUncontrollable,
  kRiccatiDiverged,
  kDegenerateOrbit,
  kConfig,
};

const char* ErrorCodeName(ErrorCode code);

/// True for codes that mean "no admissible design / state" rather than a
/// numerical breakdown. The CLI maps these to exit code 2, the rest to 3.
bool IsInfeasibility(ErrorCode code);

class ZdError : public std::runtime_error {
 public:
  ZdError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace zdshape
