#include "peakrep/error.hpp"

namespace peakrep {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kAlreadyPreprocessed: return "AlreadyPreprocessed";
    case ErrorCode::kNotPreprocessed: return "NotPreprocessed";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kWrongAnchor: return "WrongAnchor";
    case ErrorCode::kMissingSentinel: return "MissingSentinel";
    case ErrorCode::kMalformedPair: return "MalformedPair";
    case ErrorCode::kNonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::kSegmentMismatch: return "SegmentMismatch";
    case ErrorCode::kTooFewKnots: return "TooFewKnots";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kFlatInput: return "FlatInput";
    case ErrorCode::kUnsupportedRate: return "UnsupportedRate";
    case ErrorCode::kNoPeriodFound: return "NoPeriodFound";
    case ErrorCode::kNotSorted: return "NotSorted";
    case ErrorCode::kInsufficientPeaks: return "InsufficientPeaks";
    case ErrorCode::kGroundTruthDegenerate: return "GroundTruthDegenerate";
    case ErrorCode::kTooFewSubjects: return "TooFewSubjects";
    case ErrorCode::kDegenerateSample: return "DegenerateSample";
    case ErrorCode::kAlignmentError: return "AlignmentError";
    case ErrorCode::kUnknownRecord: return "UnknownRecord";
    case ErrorCode::kInvalidLabel: return "InvalidLabel";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

}  // namespace peakrep
