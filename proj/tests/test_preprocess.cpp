#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "helpers.hpp"
#include "oracles.hpp"
#include "peakrep/preprocess.hpp"
#include "peakrep/rng.hpp"

using namespace peakrep;

namespace {

std::vector<double> tone(double hz, double fs, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / fs);
  return x;
}

double peak_abs(const std::vector<double>& x, std::size_t from, std::size_t to) {
  double m = 0;
  for (std::size_t i = from; i < to; ++i) m = std::max(m, std::fabs(x[i]));
  return m;
}

}  // namespace

TEST_CASE("windowing") {
  std::vector<double> raw(2500, 1.0);
  const auto w = segment_windows(raw, 100.0, 1000);
  REQUIRE(w.size() == 2);
  CHECK(w[0].samples.size() == 1000);
  CHECK(!w[0].preprocessed);
  CHECK(segment_windows(std::vector<double>(1000, 0.0), 100.0).size() == 1);
  CHECK_THROWS_AS(segment_windows(std::vector<double>(999, 0.0), 100.0), Error);
}

TEST_CASE("windowing carries ground truth into the window that holds it") {
  auto rec = testing::raw_segment(std::vector<double>(2500, 0.0), 100.0, false);
  rec.segment_id = "rec";
  rec.gt_peaks = {10, 999, 1000, 1500, 2100};
  const auto w = segment_windows(rec, 1000);
  REQUIRE(w.size() == 2);
  CHECK(w[0].segment_id == "rec-w0");
  CHECK(w[0].gt_peaks == IndexList{10, 999});
  CHECK(w[1].gt_peaks == IndexList{0, 500});
}

TEST_CASE("band-pass on DC, passband and stopband tones") {
  const FilterSpec spec;
  const auto dc = butterworth_bandpass(std::vector<double>(1000, 1.0), spec);
  CHECK(peak_abs(dc, 100, 900) < 0.01);
  const auto pass = butterworth_bandpass(tone(5.0, 100.0, 2000), spec);
  const double g = peak_abs(pass, 500, 1500);
  CHECK(g >= 0.95);
  CHECK(g <= 1.05);
  CHECK(peak_abs(butterworth_bandpass(tone(40.0, 100.0, 2000), spec), 500, 1500) < 0.05);
}

TEST_CASE("sections agree with the single transfer function reference") {
  Rng rng(3);
  std::vector<double> x(1000);
  for (auto& v : x) v = rng.normal() + 2.0;
  for (const int order : {2, 4, 6}) {
    FilterSpec spec;
    spec.order = order;
    const auto ref = oracle::butter_bandpass(order, spec.low_hz, spec.high_hz, spec.fs);
    const auto ours = butterworth_bandpass(x, spec);
    const auto theirs = oracle::filtfilt(ref, x, filtfilt_pad_length(spec));
    double worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::fabs(ours[i] - theirs[i]));
    CHECK(worst < 1e-8);

    spec.zero_phase = false;
    const auto causal = butterworth_bandpass(x, spec);
    const auto causal_ref = oracle::lfilter(ref, x, {});
    worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::fabs(causal[i] - causal_ref[i]));
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("filter is linear") {
  Rng rng(11);
  std::vector<double> x(800), y(800), mix(800);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.normal();
    y[i] = rng.normal() * 3.0;
    mix[i] = 2.0 * x[i] - 0.5 * y[i];
  }
  const FilterSpec spec;
  const auto fx = butterworth_bandpass(x, spec);
  const auto fy = butterworth_bandpass(y, spec);
  const auto fm = butterworth_bandpass(mix, spec);
  double scale = 0, err = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale = std::max(scale, std::fabs(fm[i]));
    err = std::max(err, std::fabs(fm[i] - (2.0 * fx[i] - 0.5 * fy[i])));
  }
  CHECK(err <= 1e-8 * scale);
}

TEST_CASE("zero phase keeps the apex of a symmetric pulse") {
  std::vector<double> x(1001, 0.0);
  for (int k = -20; k <= 20; ++k) x[500 + k] = std::exp(-0.5 * (k / 4.0) * (k / 4.0));
  const auto y = butterworth_bandpass(x, FilterSpec{});
  CHECK(std::max_element(y.begin(), y.end()) - y.begin() == 500);
}

TEST_CASE("filter spec validation") {
  FilterSpec bad;
  bad.order = 3;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = FilterSpec{};
  bad.high_hz = 50.0;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = FilterSpec{};
  bad.low_hz = 20.0;
  CHECK_THROWS_AS(validate(bad), Error);
  try {
    butterworth_bandpass(std::vector<double>(12, 1.0), FilterSpec{});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTooShort);
  }
}

TEST_CASE("z-score") {
  const auto z = zscore(std::vector<double>{1, 2, 3});
  CHECK(z[0] == doctest::Approx(-1.224744871391589));
  CHECK(z[1] == doctest::Approx(0.0));
  CHECK(z[2] == doctest::Approx(1.224744871391589));
  CHECK(zscore(std::vector<double>{5, 5, 5, 5}) == std::vector<double>{0, 0, 0, 0});
  Rng rng(1);
  std::vector<double> x(300);
  for (auto& v : x) v = 4.0 + 7.0 * rng.normal();
  const auto once = zscore(x);
  const double mean = std::accumulate(once.begin(), once.end(), 0.0) / once.size();
  double var = 0;
  for (const double v : once) var += (v - mean) * (v - mean);
  CHECK(std::fabs(mean) < 1e-9);
  CHECK(std::fabs(std::sqrt(var / once.size()) - 1.0) < 1e-9);
  const auto twice = zscore(once);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::fabs(twice[i] - once[i]) < 1e-9);
  CHECK(std::max_element(x.begin(), x.end()) - x.begin() == std::max_element(once.begin(), once.end()) - once.begin());
  CHECK_THROWS_AS(zscore(std::vector<double>{1.0}), Error);
}

TEST_CASE("preprocessing keeps R apexes within two samples") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto raw = testing::synth(Modality::kECG, seed, 0.9, 0.1);
    const auto pre = preprocess_segment(raw, FilterSpec{});
    CHECK(pre.preprocessed);
    CHECK(pre.gt_peaks == raw.gt_peaks);
    for (const auto g : pre.gt_peaks) {
      const auto lo = std::max<Index>(0, g - 2);
      const auto hi = std::min<Index>(static_cast<Index>(pre.samples.size()) - 1, g + 2);
      Index best = lo;
      for (Index i = lo; i <= hi; ++i)
        if (pre.samples[i] > pre.samples[best]) best = i;
      CHECK(best > lo);
      CHECK(best < hi);
    }
  }
}

TEST_CASE("preprocessing a flat segment and a preprocessed one") {
  const auto flat = preprocess_segment(testing::raw_segment(std::vector<double>(500, 3.0), 100.0, false), FilterSpec{});
  CHECK(std::all_of(flat.samples.begin(), flat.samples.end(), [](double v) { return v == 0.0; }));
  try {
    preprocess_segment(flat, FilterSpec{});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAlreadyPreprocessed);
  }
}
