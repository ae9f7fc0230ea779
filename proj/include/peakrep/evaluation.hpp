#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peakrep/detectors.hpp"
#include "peakrep/signal.hpp"

namespace peakrep {

enum class ToleranceKind { kFixedMs, kRelativeIbiPct };

struct TolerancePolicy {
  ToleranceKind kind = ToleranceKind::kFixedMs;
  double value = 30.0;

  static TolerancePolicy fixed_ms(double ms) { return {ToleranceKind::kFixedMs, ms}; }
  static TolerancePolicy relative_pct(double pct) { return {ToleranceKind::kRelativeIbiPct, pct}; }
  /// "fixed_ms:30" or "relative_pct:5".
  static TolerancePolicy parse(std::string_view text);
  std::string to_string() const;
};

void validate(const TolerancePolicy& policy);

struct MatchPair {
  Index pred;
  Index gt;
  double delta_s;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // sorted by gt index
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<double> tolerance_s;  // one per gt peak
};

/// Tolerance radius in seconds for every gt peak.
std::vector<double> tolerances(std::span<const Index> gt, double fs, const TolerancePolicy& policy);

/// One-to-one matching. Pairs are accepted greedily in ascending |delta|
/// (ties: smaller gt, then smaller pred); any augmenting paths left after the
/// greedy pass are then applied so the number of matches is maximal.
MatchResult match_peaks(std::span<const Index> pred, std::span<const Index> gt, double fs,
                        const TolerancePolicy& policy);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Prf prf(const MatchResult& m);
Prf prf(std::size_t tp, std::size_t fp, std::size_t fn);

std::vector<double> intervals(std::span<const Index> peaks, double fs);

enum class HrvMetric { kSdnn, kRmssd };

struct HrHrv {
  double hr_bpm;
  double hrv_ms;
};

double heart_rate(std::span<const double> ibis);
double heart_rate_variability(std::span<const double> ibis, HrvMetric metric = HrvMetric::kSdnn);
HrHrv hr_hrv(std::span<const double> ibis, HrvMetric metric = HrvMetric::kSdnn);

/// Metrics that cannot be computed are left empty and named in `excluded`
/// (HR, HRV, HRV_MAPE) instead of being scored against a sentinel.
struct HrErrors {
  std::optional<double> hr_mae;
  std::optional<double> hr_mape;
  std::optional<double> hrv_mae;
  std::optional<double> hrv_mape;
  std::vector<std::string> excluded;
};

HrErrors hr_hrv_errors(std::span<const Index> pred, std::span<const Index> gt, double fs,
                       HrvMetric metric = HrvMetric::kSdnn);

struct ScoreReport {
  std::string segment_id;
  std::string detector;
  std::string policy;
  Prf prf;
  HrErrors errors;
};

ScoreReport score_segment(const std::string& segment_id, const std::string& detector, std::span<const Index> pred,
                          std::span<const Index> gt, double fs, const TolerancePolicy& policy,
                          HrvMetric metric = HrvMetric::kSdnn);

std::string score_csv_header();
std::string score_csv_row(const ScoreReport& r);

/// Streaming mean / sample variance; merge() is associative.
struct RunningStats {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const RunningStats& other);
  double sample_std() const;
};

struct MetricSummary {
  std::string metric;
  double mean = 0.0;
  double std = 0.0;  // sample std over folds
  std::size_t folds = 0;
  std::size_t excluded = 0;  // segments without a value for this metric
};

/// Per-fold means of each metric, then mean and sample std across folds.
std::vector<MetricSummary> aggregate_by_fold(const std::vector<ScoreReport>& reports, const std::vector<int>& fold_of);

std::vector<double> metric_column(const std::vector<ScoreReport>& reports, const std::string& metric);
const std::vector<std::string>& metric_names();

struct FoldAssignment {
  int k = 4;
  std::uint64_t seed = 0;
  std::map<std::string, int> fold_of;

  std::vector<std::size_t> fold_sizes() const;
};

FoldAssignment cv_split(std::span<const std::string> subject_ids, int k, std::uint64_t seed);

struct WelchResult {
  double t_stat;
  double dof;
  double p_two_tailed;
};

/// Two-tailed p for Student's t with `dof` degrees of freedom.
double student_t_two_tailed_p(double t, double dof);
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

std::string stats_csv_header();
std::string stats_csv_row(const std::string& metric, const WelchResult& w);

struct NoiseRow {
  double sigma;
  ScoreReport report;
};

/// Adds seeded white Gaussian noise (z-units) to a preprocessed segment, runs
/// the detector and scores against gt. A sigma=0 reference row comes first.
std::vector<NoiseRow> noise_sweep(const SignalSegment& seg, const DetectorConfig& detector,
                                  std::span<const double> sigmas, std::uint64_t seed, const TolerancePolicy& policy);

}  // namespace peakrep
