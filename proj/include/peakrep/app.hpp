#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "peakrep/detectors.hpp"
#include "peakrep/evaluation.hpp"
#include "peakrep/preprocess.hpp"
#include "peakrep/representation.hpp"
#include "peakrep/reward.hpp"
#include "peakrep/signal.hpp"

namespace peakrep {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Everything a run can be configured with. The JSON key tree mirrors the
/// field groups (see README); command-line flags override the file.
struct RunConfig {
  std::vector<std::string> inputs;
  SegmentFormat input_format = SegmentFormat::kRecords;
  CsvOptions csv;
  std::string out = "out";
  std::size_t window_len = 1000;
  FilterSpec filter;
  int min_distance = 0;
  TimeScale ts_scale;
  std::vector<int> distances = {0, 2, 5, 10};
  std::vector<DetectorConfig> detectors;  // empty: all five with defaults
  TolerancePolicy tolerance;
  HrvMetric hrv = HrvMetric::kSdnn;
  RewardWeights weights;
  double reward_tol_ms = 30.0;
  std::vector<double> noise_sigmas = {0.1, 0.2, 0.3, 0.4, 0.5};
  int cv_k = 4;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

/// Throws kConfigError for unknown keys, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);
void validate(const RunConfig& cfg);

std::string sha256_hex(const std::filesystem::path& file);

struct Manifest {
  std::string subcommand;
  nlohmann::ordered_json config;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
};

/// Writes <dir>/manifest.json with digests of every input and output.
void write_manifest(const std::filesystem::path& dir, const Manifest& m);

/// One reward batch record in, the same record plus the reward breakdown out.
nlohmann::ordered_json score_reward_record(const nlohmann::ordered_json& record, const RewardWeights& weights,
                                           double tol_ms, TimeScale default_scale);

/// Results in input order; at most `jobs` items in flight. The exception of
/// the lowest failing index is rethrown.
template <class T, class F>
auto parallel_map(const std::vector<T>& items, unsigned jobs, F&& f) {
  using R = decltype(f(items.front()));
  std::vector<std::optional<R>> slots(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        slots[i].emplace(f(items[i]));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(items.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(items.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 internal error.
int exit_code_for(ErrorCode code);

int run_cli(int argc, char** argv);

}  // namespace peakrep
