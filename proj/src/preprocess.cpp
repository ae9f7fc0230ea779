#include "peakrep/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

namespace peakrep {
namespace {

using cplx = std::complex<double>;

std::vector<double> odd_extend(std::span<const double> x, std::size_t pad) {
  const std::size_t n = x.size();
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);
  return ext;
}

std::vector<std::array<double, 2>> scaled(std::vector<std::array<double, 2>> state, double k) {
  for (auto& s : state) {
    s[0] *= k;
    s[1] *= k;
  }
  return state;
}

}  // namespace

void validate(const FilterSpec& spec) {
  auto fail = [](const char* why) { throw Error(ErrorCode::kInvalidSpec, why); };
  if (!(spec.fs > 0.0)) fail("fs must be positive");
  if (spec.order < 2 || spec.order % 2 != 0) fail("order must be even and >= 2");
  if (!(spec.low_hz > 0.0 && spec.low_hz < spec.high_hz && spec.high_hz < spec.fs / 2.0))
    fail("band edges must satisfy 0 < low_hz < high_hz < fs/2");
}

std::vector<Biquad> design_butterworth_bandpass(const FilterSpec& spec) {
  validate(spec);
  const int n_proto = spec.order / 2;
  const double fs2 = 2.0 * spec.fs;
  const double w_lo = fs2 * std::tan(std::numbers::pi * spec.low_hz / spec.fs);
  const double w_hi = fs2 * std::tan(std::numbers::pi * spec.high_hz / spec.fs);
  const double bw = w_hi - w_lo;
  const double w0_sq = w_lo * w_hi;

  // Analog band-pass poles, then bilinear-mapped digital poles.
  std::vector<cplx> poles;
  cplx denom = 1.0;
  for (int k = 0; k < n_proto; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + n_proto + 1) / (2.0 * n_proto);
    const cplx proto = std::polar(1.0, theta);
    const cplx half = proto * bw / 2.0;
    const cplx root = std::sqrt(half * half - w0_sq);
    for (const cplx s : {half + root, half - root}) {
      denom *= (fs2 - s);
      poles.push_back((fs2 + s) / (fs2 - s));
    }
  }
  // n_proto zeros at s = 0 and n_proto at infinity.
  const double gain = (std::pow(bw, n_proto) * std::pow(fs2, n_proto) / denom).real();

  // Pair each pole with its conjugate; real poles pair with each other.
  std::vector<cplx> upper, reals;
  for (const auto& p : poles) {
    if (std::abs(p.imag()) <= 1e-12 * std::abs(p))
      reals.emplace_back(p.real(), 0.0);
    else if (p.imag() > 0.0)
      upper.push_back(p);
  }
  std::sort(upper.begin(), upper.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
  std::sort(reals.begin(), reals.end(), [](cplx a, cplx b) { return a.real() < b.real(); });

  std::vector<Biquad> sos;
  for (const auto& p : upper) {
    Biquad q;
    q.b = {1.0, 0.0, -1.0};
    q.a = {1.0, -2.0 * p.real(), std::norm(p)};
    sos.push_back(q);
  }
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    Biquad q;
    q.b = {1.0, 0.0, -1.0};
    q.a = {1.0, -(reals[i].real() + reals[i + 1].real()), reals[i].real() * reals[i + 1].real()};
    sos.push_back(q);
  }
  if (static_cast<int>(sos.size()) != n_proto)
    throw Error(ErrorCode::kInternal, "unpaired band-pass pole");
  for (double& c : sos.front().b) c *= gain;
  return sos;
}

std::vector<std::array<double, 2>> sos_step_state(std::span<const Biquad> sos) {
  std::vector<std::array<double, 2>> state;
  double scale = 1.0;
  for (const auto& q : sos) {
    const double dc = (q.b[0] + q.b[1] + q.b[2]) / (q.a[0] + q.a[1] + q.a[2]);
    const double z1 = q.b[2] - q.a[2] * dc;
    const double z0 = q.b[1] - q.a[1] * dc + z1;
    state.push_back({scale * z0, scale * z1});
    scale *= dc;
  }
  return state;
}

std::vector<double> sos_filter(std::span<const Biquad> sos, std::span<const double> x,
                               std::vector<std::array<double, 2>> state) {
  if (state.empty()) state.assign(sos.size(), {0.0, 0.0});
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t s = 0; s < sos.size(); ++s) {
    const auto& q = sos[s];
    auto& z = state[s];
    for (double& v : y) {
      const double in = v;
      const double out = q.b[0] * in + z[0];
      z[0] = q.b[1] * in - q.a[1] * out + z[1];
      z[1] = q.b[2] * in - q.a[2] * out;
      v = out;
    }
  }
  return y;
}

std::size_t filtfilt_pad_length(const FilterSpec& spec) { return 3 * static_cast<std::size_t>(spec.order + 1); }

std::vector<double> butterworth_bandpass(std::span<const double> signal, const FilterSpec& spec) {
  const auto sos = design_butterworth_bandpass(spec);
  if (!spec.zero_phase) {
    if (signal.empty()) throw Error(ErrorCode::kTooShort, "empty signal");
    return sos_filter(sos, signal);
  }
  const std::size_t pad = filtfilt_pad_length(spec);
  if (signal.size() <= pad)
    throw Error(ErrorCode::kTooShort,
                "zero-phase filtering needs more than " + std::to_string(pad) + " samples, got " +
                    std::to_string(signal.size()));
  const auto step = sos_step_state(sos);
  auto ext = odd_extend(signal, pad);
  auto fwd = sos_filter(sos, ext, scaled(step, ext.front()));
  std::reverse(fwd.begin(), fwd.end());
  auto bwd = sos_filter(sos, fwd, scaled(step, fwd.front()));
  std::reverse(bwd.begin(), bwd.end());
  return {bwd.begin() + static_cast<std::ptrdiff_t>(pad), bwd.end() - static_cast<std::ptrdiff_t>(pad)};
}

std::vector<double> zscore(std::span<const double> signal) {
  if (signal.size() < 2) throw Error(ErrorCode::kTooShort, "z-score needs at least 2 samples");
  const double n = static_cast<double>(signal.size());
  const double mean = std::accumulate(signal.begin(), signal.end(), 0.0) / n;
  double ss = 0.0;
  for (const double v : signal) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  std::vector<double> out(signal.size(), 0.0);
  if (sd < 1e-12) return out;
  for (std::size_t i = 0; i < signal.size(); ++i) out[i] = (signal[i] - mean) / sd;
  return out;
}

std::vector<SignalSegment> segment_windows(const SignalSegment& recording, std::size_t window_len) {
  if (window_len == 0) throw Error(ErrorCode::kInvalidSpec, "window_len must be positive");
  if (recording.samples.size() < window_len)
    throw Error(ErrorCode::kTooShort, "length " + std::to_string(recording.samples.size()) + " < window " +
                                          std::to_string(window_len));
  const std::size_t count = recording.samples.size() / window_len;
  std::vector<SignalSegment> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const auto begin = static_cast<Index>(w * window_len);
    const auto end = begin + static_cast<Index>(window_len);
    SignalSegment seg;
    seg.segment_id = recording.segment_id + "-w" + std::to_string(w);
    seg.subject_id = recording.subject_id;
    seg.modality = recording.modality;
    seg.fs = recording.fs;
    seg.samples.assign(recording.samples.begin() + begin, recording.samples.begin() + end);
    for (const Index p : recording.gt_peaks)
      if (p >= begin && p < end) seg.gt_peaks.push_back(p - begin);
    seg.preprocessed = false;
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<SignalSegment> segment_windows(std::span<const double> raw, double fs, std::size_t window_len) {
  SignalSegment rec;
  rec.segment_id = "seg";
  rec.subject_id = "subject";
  rec.fs = fs;
  rec.samples.assign(raw.begin(), raw.end());
  return segment_windows(rec, window_len);
}

SignalSegment preprocess_segment(const SignalSegment& seg, const FilterSpec& spec) {
  if (seg.preprocessed) throw Error(ErrorCode::kAlreadyPreprocessed, seg.segment_id);
  FilterSpec s = spec;
  s.fs = seg.fs;
  SignalSegment out = seg;
  out.samples = zscore(butterworth_bandpass(seg.samples, s));
  out.preprocessed = true;
  return out;
}

}  // namespace peakrep
