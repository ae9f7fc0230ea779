#include "peakrep/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "peakrep/preprocess.hpp"

namespace peakrep {
namespace {

Index samples_for(double seconds, double fs) {
  return std::max<Index>(1, static_cast<Index>(std::llround(seconds * fs)));
}

std::size_t argmax(const std::vector<double>& x, std::size_t lo, std::size_t hi) {
  std::size_t best = lo;
  for (std::size_t i = lo + 1; i <= hi; ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

/// Centred moving average of width w; edge windows average what is available.
std::vector<double> moving_average(const std::vector<double>& x, Index w) {
  const auto n = static_cast<Index>(x.size());
  std::vector<double> prefix(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(x.size());
  const Index half = w / 2;
  for (Index i = 0; i < n; ++i) {
    const Index lo = std::max<Index>(0, i - half);
    const Index hi = std::min<Index>(n, i - half + w);
    out[static_cast<std::size_t>(i)] =
        (prefix[static_cast<std::size_t>(hi)] - prefix[static_cast<std::size_t>(lo)]) / static_cast<double>(hi - lo);
  }
  return out;
}

bool strict_local_max(const std::vector<double>& x, std::size_t i) {
  return i > 0 && i + 1 < x.size() && x[i] > x[i - 1] && x[i] > x[i + 1];
}

/// Keeps the larger of any two peaks closer than `gap` (leftmost on ties).
IndexList merge_close(const IndexList& peaks, const std::vector<double>& x, Index gap) {
  IndexList out;
  for (const Index p : peaks) {
    if (!out.empty() && p - out.back() < gap) {
      if (x[static_cast<std::size_t>(p)] > x[static_cast<std::size_t>(out.back())]) out.back() = p;
      continue;
    }
    out.push_back(p);
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kPanTompkins: return "pan_tompkins";
    case Algorithm::kNabian: return "nabian";
    case Algorithm::kElgendi: return "elgendi";
    case Algorithm::kBishop: return "bishop";
    case Algorithm::kChoi: return "choi";
  }
  return "pan_tompkins";
}

Algorithm algorithm_from_string(std::string_view text) {
  for (const auto a : all_algorithms())
    if (to_string(a) == text) return a;
  throw Error(ErrorCode::kInvalidSpec, "unknown detector '" + std::string(text) + "'");
}

const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> all = {Algorithm::kPanTompkins, Algorithm::kNabian, Algorithm::kElgendi,
                                             Algorithm::kBishop, Algorithm::kChoi};
  return all;
}

double DetectorConfig::param(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void validate(const DetectorConfig& cfg) {
  if (!(cfg.refractory_s > 0.0)) throw Error(ErrorCode::kInvalidSpec, "refractory_s must be positive");
  for (const auto& [key, value] : cfg.params) {
    if (key == "max_scale") {
      if (value < 0.0) throw Error(ErrorCode::kInvalidSpec, "max_scale must be >= 0");
    } else if (!(value > 0.0)) {
      throw Error(ErrorCode::kInvalidSpec, "parameter '" + key + "' must be positive");
    }
  }
}

IndexList detect(const SignalSegment& seg, const DetectorConfig& cfg) {
  validate(cfg);
  switch (cfg.algorithm) {
    case Algorithm::kPanTompkins: return pan_tompkins(seg, cfg);
    case Algorithm::kNabian: return nabian(seg, cfg);
    case Algorithm::kElgendi: return elgendi(seg, cfg);
    case Algorithm::kBishop: return bishop(seg, cfg);
    case Algorithm::kChoi: return choi(seg, cfg);
  }
  return {};
}

IndexList pan_tompkins(const SignalSegment& seg, const DetectorConfig& cfg) {
  if (!seg.preprocessed) throw Error(ErrorCode::kNotPreprocessed, seg.segment_id);
  if (seg.fs < 50.0) throw Error(ErrorCode::kUnsupportedRate, "Pan-Tompkins needs fs >= 50 Hz");
  const double fs = seg.fs;
  const auto& x = seg.samples;
  const auto n = static_cast<Index>(x.size());

  FilterSpec band{4, cfg.param("low_hz", 5.0), cfg.param("high_hz", 15.0), fs, true};
  const auto bp = butterworth_bandpass(x, band);

  std::vector<double> energy(x.size(), 0.0);
  for (Index i = 2; i + 2 < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double d = (2.0 * bp[u + 1] + bp[u + 2] - bp[u - 2] - 2.0 * bp[u - 1]) * fs / 8.0;
    energy[u] = d * d;
  }
  const auto mwi = moving_average(energy, samples_for(cfg.param("integration_ms", 150.0) / 1000.0, fs));

  std::vector<Index> candidates;
  for (std::size_t i = 1; i + 1 < mwi.size(); ++i)
    if (mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1]) candidates.push_back(static_cast<Index>(i));
  if (candidates.empty()) return {};

  const Index refractory = samples_for(cfg.param("refractory_ms", 200.0) / 1000.0, fs);
  const double frac = cfg.param("threshold_frac", 0.25);
  const double searchback = cfg.param("searchback", 1.66);

  const auto learn = std::min<Index>(n, static_cast<Index>(2.0 * fs));
  double spki = *std::max_element(mwi.begin(), mwi.begin() + learn) / 3.0;
  double npki = std::accumulate(mwi.begin(), mwi.begin() + learn, 0.0) / static_cast<double>(learn) / 2.0;
  auto thr1 = [&] { return npki + frac * (spki - npki); };

  IndexList qrs;
  std::vector<Index> rr;
  auto rr_avg = [&] {
    const auto k = std::min<std::size_t>(8, rr.size());
    return std::accumulate(rr.end() - static_cast<std::ptrdiff_t>(k), rr.end(), 0.0) / static_cast<double>(k);
  };
  auto accept = [&](Index c) {
    if (!qrs.empty()) rr.push_back(c - qrs.back());
    qrs.push_back(c);
  };
  // Largest sub-threshold candidate in (after, before) above the secondary threshold.
  auto search_back = [&](Index after, Index before) {
    Index best = -1;
    for (const Index c : candidates) {
      if (c <= after + refractory || c >= before) continue;
      const double v = mwi[static_cast<std::size_t>(c)];
      if (v > 0.5 * thr1() && (best < 0 || v > mwi[static_cast<std::size_t>(best)])) best = c;
    }
    if (best >= 0) {
      spki = 0.25 * mwi[static_cast<std::size_t>(best)] + 0.75 * spki;
      accept(best);
    }
    return best >= 0;
  };

  for (const Index c : candidates) {
    while (!qrs.empty() && !rr.empty() && static_cast<double>(c - qrs.back()) > searchback * rr_avg()) {
      if (!search_back(qrs.back(), c)) break;
    }
    if (!qrs.empty() && c - qrs.back() < refractory) continue;
    const double v = mwi[static_cast<std::size_t>(c)];
    if (v > thr1() && v > 0.0) {
      spki = 0.125 * v + 0.875 * spki;
      accept(c);
    } else {
      npki = 0.125 * v + 0.875 * npki;
    }
  }
  while (!qrs.empty() && !rr.empty() && static_cast<double>(n - qrs.back()) > searchback * rr_avg()) {
    if (!search_back(qrs.back(), n)) break;
  }

  const Index refine = samples_for(cfg.param("refine_ms", 75.0) / 1000.0, fs);
  IndexList out;
  for (const Index c : qrs) {
    const auto lo = static_cast<std::size_t>(std::max<Index>(0, c - refine));
    const auto hi = static_cast<std::size_t>(std::min<Index>(n - 1, c + refine));
    const auto r = static_cast<Index>(argmax(x, lo, hi));
    if (out.empty() || r > out.back()) out.push_back(r);
  }
  return out;
}

IndexList nabian(const SignalSegment& seg, const DetectorConfig& cfg) {
  if (!seg.preprocessed) throw Error(ErrorCode::kNotPreprocessed, seg.segment_id);
  const auto& x = seg.samples;
  const auto n = static_cast<Index>(x.size());
  const Index half = samples_for(cfg.param("window_s", 1.0), seg.fs) / 2;

  IndexList candidates;
  for (Index i = 1; i + 1 < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (!strict_local_max(x, u)) continue;
    bool is_max = true;
    for (Index j = std::max<Index>(0, i - half); j < i && is_max; ++j)
      if (x[static_cast<std::size_t>(j)] >= x[u]) is_max = false;
    for (Index j = i + 1; j <= std::min<Index>(n - 1, i + half) && is_max; ++j)
      if (x[static_cast<std::size_t>(j)] > x[u]) is_max = false;
    if (is_max) candidates.push_back(i);
  }
  return merge_close(candidates, x, samples_for(cfg.refractory_s, seg.fs));
}

IndexList elgendi(const SignalSegment& seg, const DetectorConfig& cfg) {
  if (!seg.preprocessed) throw Error(ErrorCode::kNotPreprocessed, seg.segment_id);
  const auto& x = seg.samples;
  std::vector<double> energy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) energy[i] = x[i] > 0.0 ? x[i] * x[i] : 0.0;

  const Index w1 = samples_for(cfg.param("w1_ms", 111.0) / 1000.0, seg.fs);
  const Index w2 = samples_for(cfg.param("w2_ms", 667.0) / 1000.0, seg.fs);
  const double beta = cfg.param("beta", 0.02);
  const auto ma_peak = moving_average(energy, w1);
  const auto ma_beat = moving_average(energy, w2);
  const double offset = beta * std::accumulate(energy.begin(), energy.end(), 0.0) / static_cast<double>(energy.size());

  IndexList out;
  std::size_t i = 0;
  while (i < x.size()) {
    if (!(ma_peak[i] > ma_beat[i] + offset)) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end + 1 < x.size() && ma_peak[end + 1] > ma_beat[end + 1] + offset) ++end;
    if (static_cast<Index>(end - i + 1) >= w1) out.push_back(static_cast<Index>(argmax(x, i, end)));
    i = end + 1;
  }
  return out;
}

IndexList bishop(const SignalSegment& seg, const DetectorConfig& cfg) {
  const auto& x = seg.samples;
  const auto n = static_cast<Index>(x.size());
  const auto requested = static_cast<Index>(cfg.param("max_scale", 0.0));
  if (requested > 0 && n < 2 * requested + 2)
    throw Error(ErrorCode::kTooShort, "LMS needs at least 2*max_scale+2 samples");
  const Index auto_scale = n / 2 - 1;
  if (auto_scale < 1) throw Error(ErrorCode::kTooShort, "LMS needs at least 4 samples");
  const Index scales = requested > 0 ? std::min(requested, auto_scale) : auto_scale;

  auto at = [&](Index i) { return x[static_cast<std::size_t>(i)]; };
  Index gamma = 1;
  Index best_count = -1;
  for (Index k = 1; k <= scales; ++k) {
    Index count = 0;
    for (Index i = k; i + k < n; ++i)
      if (at(i) > at(i - k) && at(i) > at(i + k)) ++count;
    if (count > best_count) {
      best_count = count;
      gamma = k;
    }
  }

  IndexList out;
  for (Index i = 1; i + 1 < n; ++i) {
    bool all = true;
    for (Index k = 1; k <= gamma && all; ++k) {
      if (i - k >= 0 && !(at(i) > at(i - k))) all = false;
      if (i + k < n && !(at(i) > at(i + k))) all = false;
    }
    if (all) out.push_back(i);
  }
  return out;
}

IndexList choi(const SignalSegment& seg, const DetectorConfig& cfg) {
  if (!seg.preprocessed) throw Error(ErrorCode::kNotPreprocessed, seg.segment_id);
  const auto& x = seg.samples;
  const auto n = static_cast<Index>(x.size());
  const Index min_lag = samples_for(cfg.param("min_period_s", 0.4), seg.fs);
  const Index max_lag = std::min<Index>(samples_for(cfg.param("max_period_s", 2.0), seg.fs), n - 1);
  if (min_lag > max_lag) throw Error(ErrorCode::kNoPeriodFound, "segment shorter than the period search band");

  std::vector<double> squared(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) squared[i] = x[i] * x[i];
  // A raw squared BCG is too spiky: one sample of jitter at the true period
  // can lose to a luckier alignment at twice the period.
  auto energy = moving_average(squared, samples_for(cfg.param("smooth_ms", 100.0) / 1000.0, seg.fs));
  const double mean = std::accumulate(energy.begin(), energy.end(), 0.0) / static_cast<double>(n);
  for (auto& v : energy) v -= mean;

  Index period = -1;
  double best = -std::numeric_limits<double>::infinity();
  double worst = std::numeric_limits<double>::infinity();
  for (Index lag = min_lag; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (Index i = 0; i + lag < n; ++i) acc += energy[static_cast<std::size_t>(i)] * energy[static_cast<std::size_t>(i + lag)];
    if (acc > best) {
      best = acc;
      period = lag;
    }
    worst = std::min(worst, acc);
  }
  if (!(best > 0.0) || best - worst <= 1e-12 * std::abs(best))
    throw Error(ErrorCode::kNoPeriodFound, seg.segment_id);

  IndexList peaks;
  for (Index start = 0; start < n; start += period) {
    const Index end = std::min<Index>(n, start + period) - 1;
    const auto best_i = argmax(x, static_cast<std::size_t>(start), static_cast<std::size_t>(end));
    if (strict_local_max(x, best_i)) peaks.push_back(static_cast<Index>(best_i));
  }

  const double merge_frac = cfg.param("merge_frac", 0.5);
  while (peaks.size() >= 2) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < peaks.size(); ++i) gaps.push_back(static_cast<double>(peaks[i] - peaks[i - 1]));
    const double limit = merge_frac * median(gaps);
    std::size_t closest = 0;
    for (std::size_t i = 1; i < gaps.size(); ++i)
      if (gaps[i] < gaps[closest]) closest = i;
    if (!(gaps[closest] < limit)) break;
    const auto a = peaks[closest], b = peaks[closest + 1];
    const bool drop_right = x[static_cast<std::size_t>(b)] <= x[static_cast<std::size_t>(a)];
    peaks.erase(peaks.begin() + static_cast<std::ptrdiff_t>(closest + (drop_right ? 1 : 0)));
  }
  return peaks;
}

}  // namespace peakrep
