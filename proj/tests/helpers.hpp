#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "peakrep/preprocess.hpp"
#include "peakrep/signal.hpp"

namespace testing {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 gen{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("peakrep-" + tag + "-" + std::to_string(gen()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline peakrep::SignalSegment synth(peakrep::Modality m, std::uint64_t seed, double ibi = 1.0, double jitter = 0.0,
                                    double noise = 0.0) {
  peakrep::SynthSpec s;
  s.modality = m;
  s.rng_seed = seed;
  s.mean_ibi_s = ibi;
  s.ibi_jitter_frac = jitter;
  s.noise_sigma = noise;
  s.segment_id = "seg-" + std::to_string(seed);
  s.subject_id = "subj-" + std::to_string(seed % 7);
  return peakrep::synthesize_segment(s);
}

inline peakrep::SignalSegment prepared(peakrep::Modality m, std::uint64_t seed, double ibi = 1.0, double jitter = 0.0,
                                       double noise = 0.0) {
  return peakrep::preprocess_segment(synth(m, seed, ibi, jitter, noise), peakrep::FilterSpec{});
}

/// A preprocessed segment with the given samples and fs.
inline peakrep::SignalSegment raw_segment(std::vector<double> samples, double fs = 100.0, bool preprocessed = true) {
  peakrep::SignalSegment s;
  s.segment_id = "fixture";
  s.subject_id = "fixture";
  s.fs = fs;
  s.samples = std::move(samples);
  s.preprocessed = preprocessed;
  return s;
}

}  // namespace testing
