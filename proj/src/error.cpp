#include "bimatch/error.hpp"

namespace bimatch {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kEmptyNetwork: return "empty-network";
    case ErrorCode::kIncompleteAssignment: return "incomplete-assignment";
    case ErrorCode::kInconsistentCycle: return "inconsistent-cycle";
    case ErrorCode::kInstrumentCoverage: return "instrument-coverage";
    case ErrorCode::kNoCycles: return "no-cycles";
    case ErrorCode::kUninformativeCycles: return "uninformative-cycles";
    case ErrorCode::kDegenerateStatistic: return "degenerate-statistic";
    case ErrorCode::kFullyUninformative: return "fully-uninformative";
    case ErrorCode::kNotIdentified: return "not-identified";
    case ErrorCode::kMonotonicityViolation: return "monotonicity-violation";
    case ErrorCode::kDegenerateUpdate: return "degenerate-update";
    case ErrorCode::kUndefinedCorrelation: return "undefined-correlation";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kAbortedRun: return "aborted-run";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

}  // namespace bimatch
