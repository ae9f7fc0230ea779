#pragma once

#include <array>
#include <span>
#include <vector>

#include "peakrep/signal.hpp"

namespace peakrep {

/// Band-pass design parameters. `order` is the order of the complete
/// band-pass filter, so the analog low-pass prototype has order / 2 poles.
struct FilterSpec {
  int order = 4;
  double low_hz = 0.6;
  double high_hz = 15.0;
  double fs = 100.0;
  bool zero_phase = true;
};

void validate(const FilterSpec& spec);

/// One second-order section, a[0] == 1.
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 3> a{1.0, 0.0, 0.0};
};

/// Butterworth band-pass: analog prototype, low-pass to band-pass transform,
/// bilinear transform with pre-warped band edges, grouped into conjugate-pair
/// sections. The overall gain sits on the first section.
std::vector<Biquad> design_butterworth_bandpass(const FilterSpec& spec);

/// Steady-state section states for a unit step input (scaled through the
/// cascade), as used to start the filter without an edge transient.
std::vector<std::array<double, 2>> sos_step_state(std::span<const Biquad> sos);

/// Transposed direct-form II cascade. `state` (may be empty) is consumed and
/// left holding the final state.
std::vector<double> sos_filter(std::span<const Biquad> sos, std::span<const double> x,
                               std::vector<std::array<double, 2>> state = {});

/// Pad length used by the zero-phase path: 3 * (order + 1).
std::size_t filtfilt_pad_length(const FilterSpec& spec);

std::vector<double> butterworth_bandpass(std::span<const double> signal, const FilterSpec& spec);

/// Population z-score; all zeros when the input std is below 1e-12.
std::vector<double> zscore(std::span<const double> signal);

/// Non-overlapping windows; the trailing remainder is dropped. Ground-truth
/// peaks of the recording are carried into the window that contains them.
std::vector<SignalSegment> segment_windows(const SignalSegment& recording, std::size_t window_len = 1000);
std::vector<SignalSegment> segment_windows(std::span<const double> raw, double fs, std::size_t window_len = 1000);

SignalSegment preprocess_segment(const SignalSegment& seg, const FilterSpec& spec);

}  // namespace peakrep
