#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "peakrep/signal.hpp"

namespace peakrep {

enum class Algorithm { kPanTompkins, kNabian, kElgendi, kBishop, kChoi };

std::string_view to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view text);
const std::vector<Algorithm>& all_algorithms();

/// Detector selection plus per-algorithm parameters. Unset keys use the
/// defaults listed next to each detector below.
struct DetectorConfig {
  Algorithm algorithm = Algorithm::kPanTompkins;
  std::map<std::string, double> params;
  double refractory_s = 0.25;

  double param(const std::string& key, double fallback) const;
};

void validate(const DetectorConfig& cfg);

/// Dispatches on cfg.algorithm. All detectors return strictly increasing
/// indices in [0, n); ties resolve to the leftmost index.
IndexList detect(const SignalSegment& seg, const DetectorConfig& cfg);

/// Band-pass (low_hz=5, high_hz=15), five-point derivative, squaring and a
/// moving integration window (integration_ms=150), then adaptive dual
/// thresholds (threshold_frac=0.25) with refractory_ms=200 and search-back at
/// searchback=1.66 times the running RR. Fiducials are moved to the signal
/// maximum within +-refine_ms=75.
IndexList pan_tompkins(const SignalSegment& seg, const DetectorConfig& cfg);

/// A sample is a candidate when it is the maximum of the centred window of
/// window_s=1.0 seconds and a strict local maximum; candidates closer than
/// refractory_s are merged keeping the larger one.
IndexList nabian(const SignalSegment& seg, const DetectorConfig& cfg);

/// Two moving averages of the clipped, squared signal (w1_ms=111,
/// w2_ms=667); blocks where the short average exceeds the long one plus
/// beta=0.02 times the mean energy, at least w1 long, yield their raw maximum.
IndexList elgendi(const SignalSegment& seg, const DetectorConfig& cfg);

/// Local maxima scalogram over scales 1..L, L = min(max_scale, n/2 - 1)
/// (max_scale=0 means automatic). Emits points that are local maxima at every
/// scale up to the scale with the largest row sum.
IndexList bishop(const SignalSegment& seg, const DetectorConfig& cfg);

/// Period from the (unnormalised) autocorrelation of the squared signal,
/// smoothed over smooth_ms=100, searched over
/// [min_period_s=0.4, max_period_s=2.0]; one maximum per period-long window,
/// kept when it is a strict local maximum of the signal;
/// then the smaller of any pair closer than merge_frac=0.5 times the median
/// interval is removed until none remain.
IndexList choi(const SignalSegment& seg, const DetectorConfig& cfg);

}  // namespace peakrep
