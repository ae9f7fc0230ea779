#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace peakrep {

enum class ErrorCode {
  // signal_io
  kFileNotFound,
  kFormatError,
  kInvariantViolation,
  kInvalidSpec,
  // preprocess
  kTooShort,
  kAlreadyPreprocessed,
  kNotPreprocessed,
  // representation
  kOutOfRange,
  kParseError,
  kWrongAnchor,
  kMissingSentinel,
  kMalformedPair,
  kNonMonotonicTimestamps,
  kSegmentMismatch,
  // reconstruction
  kTooFewKnots,
  kLengthMismatch,
  kFlatInput,
  // detectors
  kUnsupportedRate,
  kNoPeriodFound,
  // evaluation
  kNotSorted,
  kInsufficientPeaks,
  kGroundTruthDegenerate,
  kTooFewSubjects,
  kDegenerateSample,
  // audit
  kAlignmentError,
  kUnknownRecord,
  kInvalidLabel,
  // cli
  kConfigError,
  kInternal,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. The code identifies the error kind
/// named in the module contracts; the message carries the location/reason.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace peakrep
