#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "peakrep/signal.hpp"

namespace peakrep {

/// kNone marks samples kept by the lossless mode that are not extrema, and
/// entries recovered from text (the grammar does not carry polarity).
enum class Polarity { kMax, kMin, kNone };

std::string_view to_string(Polarity p);

/// Calendar seconds per sample index, as an exact rational num/den.
struct TimeScale {
  std::int64_t num = 1;
  std::int64_t den = 1;

  /// Accepts "1", "1/100", "0.01" is rejected (use a fraction).
  static TimeScale parse(std::string_view text);
  static TimeScale per_sample_of(double fs);  // 1/fs for integral fs
  std::string to_string() const;
  double seconds() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const TimeScale&) const = default;
};

struct CandidatePeak {
  Index index = 0;
  double amplitude = 0.0;
  Polarity polarity = Polarity::kNone;
  std::string timestamp;
};

struct PeakRepresentation {
  std::string segment_ref;
  double fs = 0.0;
  TimeScale scale;
  int min_distance = 0;
  std::vector<CandidatePeak> entries;  // strictly increasing index
};

enum class ExtremaMode { kBoth, kMaxOnly };

/// Candidate extrema of a preprocessed segment.
///
/// min_distance == 0 is the lossless setting: every sample is retained and
/// strict extrema carry their polarity. For min_distance >= 1 only strict
/// local extrema are kept (a plateau reports its leftmost sample), and within
/// each polarity an extremum is dropped when a same-polarity extremum of
/// larger |amplitude| (leftmost on ties) lies fewer than min_distance samples
/// away. The kept set therefore shrinks monotonically as min_distance grows.
std::vector<CandidatePeak> extract_extrema(const SignalSegment& seg, int min_distance,
                                           ExtremaMode mode = ExtremaMode::kBoth, TimeScale scale = {});

PeakRepresentation build_representation(const SignalSegment& seg, int min_distance, TimeScale scale = {});

inline constexpr std::string_view kTimestampAnchor = "2020-01-01 00:00:00";
inline constexpr std::int64_t kMaxElapsedSeconds = 86400LL * 365;

/// `YYYY-MM-DD HH:MM:SS` for floor(index * scale) seconds after the anchor.
std::string index_to_timestamp(Index index, TimeScale scale = {});
std::string seconds_to_timestamp(std::int64_t elapsed);

/// Elapsed seconds since the anchor; throws kParseError / kWrongAnchor.
std::int64_t timestamp_to_seconds(std::string_view ts);

/// Smallest index whose timestamp equals `ts`.
Index timestamp_to_index(std::string_view ts, TimeScale scale = {});

/// Fixed six-decimal amplitude text.
std::string format_amplitude(double amplitude);

inline constexpr std::string_view kTsStart = "<TS_START>";
inline constexpr std::string_view kTsEnd = "<TS_END>";

std::string serialize(const PeakRepresentation& rep);

/// Inverse of serialize. Metadata absent from the text (segment, fs, scale,
/// distance) comes from the caller; polarity comes back as kNone.
PeakRepresentation parse_serialized(std::string_view text, TimeScale scale = {}, std::string segment_ref = {},
                                    double fs = 0.0, int min_distance = 0);

double retention_ratio(const PeakRepresentation& rep, const SignalSegment& seg);

}  // namespace peakrep
