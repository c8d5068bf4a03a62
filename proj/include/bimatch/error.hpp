#pragma once

#include <stdexcept>
#include <string>

namespace bimatch {

enum class ErrorCode {
  kIo,
  kParse,
  kEmptyNetwork,
  kIncompleteAssignment,
  kInconsistentCycle,
  kInstrumentCoverage,
  kNoCycles,
  kUninformativeCycles,
  kDegenerateStatistic,
  kFullyUninformative,
  kNotIdentified,
  kMonotonicityViolation,
  kDegenerateUpdate,
  kUndefinedCorrelation,
  kNumeric,
  kAbortedRun,
  kInvalidArgument,
};

/// Name used in reports and exit-code tables, e.g. "no-cycles".
const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bimatch
