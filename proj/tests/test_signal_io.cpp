#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "peakrep/signal.hpp"

using namespace peakrep;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInternal;
}

}  // namespace

TEST_CASE("records file round trip is byte identical") {
  testing::TempDir dir("io");
  std::vector<SignalSegment> segs{testing::synth(Modality::kECG, 1), testing::synth(Modality::kBCG, 2, 0.8, 0.1, 0.2)};
  write_segments(dir / "a.jsonl", segs);
  const auto loaded = load_segments(dir / "a.jsonl", SegmentFormat::kRecords);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0] == segs[0]);
  CHECK(loaded[1] == segs[1]);
  write_segments(dir / "b.jsonl", loaded);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
}

TEST_CASE("duplicate gt peak is an invariant violation") {
  testing::TempDir dir("io");
  auto seg = testing::raw_segment({0, 1, 2, 3, 4, 5, 6, 7}, 100.0, false);
  std::string line = to_record(seg);
  const auto pos = line.find("\"gt_peaks\":[]");
  REQUIRE(pos != std::string::npos);
  line.replace(pos, 13, "\"gt_peaks\":[5,5]");
  spit(dir / "bad.jsonl", line + "\n");
  try {
    load_segments(dir / "bad.jsonl", SegmentFormat::kRecords);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvariantViolation);
    CHECK(std::string(e.what()).find("strictly increasing") != std::string::npos);
    CHECK(std::string(e.what()).find("fixture") != std::string::npos);
  }
}

TEST_CASE("CSV column mismatch reports the row") {
  testing::TempDir dir("io");
  spit(dir / "x.csv", "index,value\n0,1.5\n1,2.5\n2\n3,1.0\n");
  try {
    load_segments(dir / "x.csv", SegmentFormat::kCsv);
    FAIL("no error");
  } catch (const FormatError& e) {
    // header is line 1, so the third data row sits on line 4
    CHECK(e.line() == 4);
  }
}

TEST_CASE("CSV with sidecar ground truth") {
  testing::TempDir dir("io");
  spit(dir / "rec.csv", "index,value\n0,0\n1,3\n2,0\n3,1\n4,0\n");
  spit(dir / "rec.peaks.csv", "index\n1\n3\n");
  const auto segs = load_segments(dir / "rec.csv", SegmentFormat::kCsv, CsvOptions{250.0, Modality::kPPG, ""});
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].fs == 250.0);
  CHECK(segs[0].modality == Modality::kPPG);
  CHECK(segs[0].subject_id == "rec");
  CHECK(segs[0].gt_peaks == IndexList{1, 3});
  CHECK(segs[0].samples == std::vector<double>{0, 3, 0, 1, 0});
}

TEST_CASE("load errors") {
  testing::TempDir dir("io");
  CHECK(code_of([&] { load_segments(dir / "missing.jsonl", SegmentFormat::kRecords); }) == ErrorCode::kFileNotFound);
  spit(dir / "junk.jsonl", "{\"segment_id\": \n");
  CHECK(code_of([&] { load_segments(dir / "junk.jsonl", SegmentFormat::kRecords); }) == ErrorCode::kFormatError);
  auto seg = testing::raw_segment({1, 2, 3}, 100.0, false);
  seg.gt_peaks = {3};
  spit(dir / "range.jsonl", to_record(seg) + "\n");
  CHECK(code_of([&] { load_segments(dir / "range.jsonl", SegmentFormat::kRecords); }) ==
        ErrorCode::kInvariantViolation);
}

TEST_CASE("noise-free synthesis: spacing and strict maxima") {
  SynthSpec s;
  s.fs = 100;
  s.duration_samples = 1000;
  s.mean_ibi_s = 1.0;
  const auto seg = synthesize_segment(s);
  CHECK((seg.gt_peaks.size() == 9 || seg.gt_peaks.size() == 10));
  for (std::size_t i = 1; i < seg.gt_peaks.size(); ++i) CHECK(seg.gt_peaks[i] - seg.gt_peaks[i - 1] == 100);
  for (const auto m : {Modality::kECG, Modality::kPPG, Modality::kBCG, Modality::kBSG, Modality::kSynth}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto x = testing::synth(m, seed, 0.6 + 0.05 * seed, 0.2);
      for (const auto i : x.gt_peaks) {
        const auto k = static_cast<std::size_t>(i);
        REQUIRE(k >= 1);
        REQUIRE(k + 1 < x.samples.size());
        CHECK(x.samples[k - 1] < x.samples[k]);
        CHECK(x.samples[k] > x.samples[k + 1]);
      }
    }
  }
}

TEST_CASE("synthesis is deterministic") {
  const auto a = testing::synth(Modality::kPPG, 42, 0.9, 0.2, 0.3);
  const auto b = testing::synth(Modality::kPPG, 42, 0.9, 0.2, 0.3);
  CHECK(a == b);
  const auto c = testing::synth(Modality::kPPG, 43, 0.9, 0.2, 0.3);
  CHECK(a.samples != c.samples);
}

TEST_CASE("synthesis jitter stays in band") {
  SynthSpec s;
  s.duration_samples = 20000;
  s.mean_ibi_s = 0.8;
  s.ibi_jitter_frac = 0.2;
  s.rng_seed = 9;
  const auto seg = synthesize_segment(s);
  for (std::size_t i = 1; i < seg.gt_peaks.size(); ++i) {
    const double ibi = (seg.gt_peaks[i] - seg.gt_peaks[i - 1]) / s.fs;
    // peaks sit on integer samples, so allow one sample of rounding at each end
    CHECK(ibi >= 0.8 * 0.8 - 2.0 / s.fs);
    CHECK(ibi <= 0.8 * 1.2 + 2.0 / s.fs);
  }
}

TEST_CASE("synthesis noise level") {
  SynthSpec s;
  s.duration_samples = 100000;
  s.rng_seed = 5;
  const auto clean = synthesize_segment(s);
  s.noise_sigma = 0.3;
  const auto noisy = synthesize_segment(s);
  double sum = 0, sq = 0;
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    const double d = noisy.samples[i] - clean.samples[i];
    sum += d;
    sq += d * d;
  }
  const double n = static_cast<double>(clean.samples.size());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(sd == doctest::Approx(0.3).epsilon(0.1));
}

TEST_CASE("invalid synthesis specs") {
  SynthSpec s;
  s.mean_ibi_s = 0.1;  // 10 samples per beat at 100 Hz
  CHECK(code_of([&] { synthesize_segment(s); }) == ErrorCode::kInvalidSpec);
  s = SynthSpec{};
  s.ibi_jitter_frac = 0.5;
  CHECK(code_of([&] { synthesize_segment(s); }) == ErrorCode::kInvalidSpec);
  s = SynthSpec{};
  s.duration_samples = 0;
  CHECK(code_of([&] { synthesize_segment(s); }) == ErrorCode::kInvalidSpec);
}

TEST_CASE("shortest round trip reals") {
  for (const double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0, 1e21}) {
    CHECK(std::stod(format_real(v)) == v);
  }
  CHECK(format_real(0.1) == "0.1");
  CHECK(format_real(2.0) == "2");
}
