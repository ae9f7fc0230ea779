#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peakrep/error.hpp"

namespace peakrep {

using Index = std::int64_t;
using IndexList = std::vector<Index>;

enum class Modality { kECG, kPPG, kBCG, kBSG, kSynth };

std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view text);

/// One fixed-length window of a recording.
struct SignalSegment {
  std::string segment_id;
  std::string subject_id;
  Modality modality = Modality::kSynth;
  double fs = 0.0;
  std::vector<double> samples;
  IndexList gt_peaks;  // strictly increasing, each in [0, samples.size())
  bool preprocessed = false;

  bool operator==(const SignalSegment&) const = default;
};

/// Throws kInvariantViolation naming the segment when a field is invalid.
void validate(const SignalSegment& seg);

/// A FormatError that knows where in the input it happened (1-based line).
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& reason)
      : Error(ErrorCode::kFormatError, "line " + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// --- synthesis ---------------------------------------------------------------

/// One Gaussian component of a beat template. Offset and width are fractions
/// of the mean inter-beat interval, so morphology scales with heart rate.
struct Wave {
  double amplitude = 0.0;
  double offset = 0.0;
  double width = 0.0;
};

/// Default beat template for a modality. The dominant wave (the fiducial the
/// ground truth marks) is the one with the largest amplitude.
std::vector<Wave> default_template(Modality m);

struct SynthSpec {
  Modality modality = Modality::kECG;
  double fs = 100.0;
  std::size_t duration_samples = 1000;
  double mean_ibi_s = 1.0;
  double ibi_jitter_frac = 0.0;  // uniform jitter half-width, fraction of mean IBI
  double noise_sigma = 0.0;
  std::vector<Wave> waves;  // empty selects default_template(modality)
  std::uint64_t rng_seed = 0;
  std::string segment_id = "synth";
  std::string subject_id = "synth";
};

/// Deterministic in the spec. Ground-truth peaks sit on the dominant apex of
/// every beat whose apex falls in [1, n-2]; with noise_sigma == 0 each of them
/// is a strict local maximum. The result has preprocessed == false.
SignalSegment synthesize_segment(const SynthSpec& spec);

// --- files -------------------------------------------------------------------

enum class SegmentFormat { kCsv, kRecords };

/// Metadata the CSV layout does not carry.
struct CsvOptions {
  double fs = 100.0;
  Modality modality = Modality::kSynth;
  std::string subject_id;  // empty: use the file stem
};

/// RECORDS: one JSON object per line. CSV: `index,value` plus optional
/// `<stem>.peaks.csv` sidecar holding the ground truth.
std::vector<SignalSegment> load_segments(const std::filesystem::path& path, SegmentFormat format,
                                         const CsvOptions& csv = {});

/// Canonical record line (fixed key order, shortest round-trip reals, no
/// trailing newline).
std::string to_record(const SignalSegment& seg);
SignalSegment parse_record(std::string_view line, std::size_t line_no = 1);

void write_segments(const std::filesystem::path& path, std::span<const SignalSegment> segments);
void write_csv_segment(const std::filesystem::path& path, const SignalSegment& seg);

/// Shortest decimal text that parses back to the same double.
std::string format_real(double value);

}  // namespace peakrep
