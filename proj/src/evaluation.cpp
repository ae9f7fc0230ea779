#include "peakrep/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <tuple>

#include <boost/math/special_functions/beta.hpp>

#include "peakrep/rng.hpp"

namespace peakrep {
namespace {

void require_sorted(std::span<const Index> v, const char* which) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] <= v[i - 1]) throw Error(ErrorCode::kNotSorted, std::string(which) + " peaks not strictly increasing");
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (const double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

std::string opt_field(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

TolerancePolicy TolerancePolicy::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw Error(ErrorCode::kInvalidSpec, "tolerance policy must be kind:value");
  const auto kind = text.substr(0, colon);
  TolerancePolicy p;
  if (kind == "fixed_ms") {
    p.kind = ToleranceKind::kFixedMs;
  } else if (kind == "relative_pct") {
    p.kind = ToleranceKind::kRelativeIbiPct;
  } else {
    throw Error(ErrorCode::kInvalidSpec, "unknown tolerance kind '" + std::string(kind) + "'");
  }
  try {
    std::size_t used = 0;
    const std::string value(text.substr(colon + 1));
    p.value = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidSpec, "bad tolerance value in '" + std::string(text) + "'");
  }
  validate(p);
  return p;
}

std::string TolerancePolicy::to_string() const {
  return std::string(kind == ToleranceKind::kFixedMs ? "fixed_ms:" : "relative_pct:") + format_real(value);
}

void validate(const TolerancePolicy& policy) {
  if (!(policy.value > 0.0) || !std::isfinite(policy.value))
    throw Error(ErrorCode::kInvalidSpec, "tolerance value must be positive");
}

std::vector<double> tolerances(std::span<const Index> gt, double fs, const TolerancePolicy& policy) {
  validate(policy);
  std::vector<double> out(gt.size());
  for (std::size_t j = 0; j < gt.size(); ++j) {
    if (policy.kind == ToleranceKind::kFixedMs) {
      out[j] = policy.value / 1000.0;
      continue;
    }
    double ibi = 1.0;
    if (j > 0) {
      ibi = static_cast<double>(gt[j] - gt[j - 1]) / fs;
    } else if (gt.size() > 1) {
      ibi = static_cast<double>(gt[1] - gt[0]) / fs;
    }
    out[j] = policy.value / 100.0 * ibi;
  }
  return out;
}

MatchResult match_peaks(std::span<const Index> pred, std::span<const Index> gt, double fs,
                        const TolerancePolicy& policy) {
  if (!(fs > 0.0)) throw Error(ErrorCode::kInvalidSpec, "fs must be positive");
  require_sorted(pred, "predicted");
  require_sorted(gt, "ground-truth");

  MatchResult result;
  result.tolerance_s = tolerances(gt, fs, policy);

  struct Edge {
    Index dist;
    std::size_t g;
    std::size_t p;
  };
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> adjacent(gt.size());
  for (std::size_t j = 0; j < gt.size(); ++j) {
    const double radius = result.tolerance_s[j] * fs * (1.0 + 1e-12);
    auto it = std::lower_bound(pred.begin(), pred.end(), static_cast<double>(gt[j]) - radius,
                               [](Index a, double b) { return static_cast<double>(a) < b; });
    for (; it != pred.end() && static_cast<double>(*it) <= static_cast<double>(gt[j]) + radius; ++it) {
      const auto i = static_cast<std::size_t>(it - pred.begin());
      edges.push_back({std::abs(*it - gt[j]), j, i});
      adjacent[j].push_back(i);
    }
  }
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return std::tie(a.dist, a.g, a.p) < std::tie(b.dist, b.g, b.p); });

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> pred_of(gt.size(), kNone);
  std::vector<std::size_t> gt_of(pred.size(), kNone);
  for (const auto& e : edges) {
    if (pred_of[e.g] != kNone || gt_of[e.p] != kNone) continue;
    pred_of[e.g] = e.p;
    gt_of[e.p] = e.g;
  }

  // Greedy can strand a gt peak whose only candidate was taken by a closer
  // neighbour; augmenting paths recover those matches.
  std::vector<char> seen(pred.size());
  std::function<bool(std::size_t)> augment = [&](std::size_t j) {
    for (const std::size_t i : adjacent[j]) {
      if (seen[i]) continue;
      seen[i] = 1;
      if (gt_of[i] == kNone || augment(gt_of[i])) {
        gt_of[i] = j;
        pred_of[j] = i;
        return true;
      }
    }
    return false;
  };
  for (std::size_t j = 0; j < gt.size(); ++j) {
    if (pred_of[j] != kNone) continue;
    std::fill(seen.begin(), seen.end(), 0);
    augment(j);
  }

  for (std::size_t j = 0; j < gt.size(); ++j) {
    if (pred_of[j] == kNone) continue;
    const Index p = pred[pred_of[j]];
    result.pairs.push_back({p, gt[j], static_cast<double>(p - gt[j]) / fs});
  }
  result.tp = result.pairs.size();
  result.fp = pred.size() - result.tp;
  result.fn = gt.size() - result.tp;
  return result;
}

Prf prf(std::size_t tp, std::size_t fp, std::size_t fn) {
  Prf r;
  if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

Prf prf(const MatchResult& m) { return prf(m.tp, m.fp, m.fn); }

std::vector<double> intervals(std::span<const Index> peaks, double fs) {
  std::vector<double> out;
  for (std::size_t i = 1; i < peaks.size(); ++i) out.push_back(static_cast<double>(peaks[i] - peaks[i - 1]) / fs);
  return out;
}

double heart_rate(std::span<const double> ibis) {
  if (ibis.empty()) throw Error(ErrorCode::kInsufficientPeaks, "HR needs at least one interval");
  return 60.0 / mean_of(ibis);
}

double heart_rate_variability(std::span<const double> ibis, HrvMetric metric) {
  if (ibis.size() < 2) throw Error(ErrorCode::kInsufficientPeaks, "HRV needs at least two intervals");
  if (metric == HrvMetric::kSdnn) return std::sqrt(sample_variance(ibis)) * 1000.0;
  double acc = 0.0;
  for (std::size_t i = 1; i < ibis.size(); ++i) acc += (ibis[i] - ibis[i - 1]) * (ibis[i] - ibis[i - 1]);
  return std::sqrt(acc / static_cast<double>(ibis.size() - 1)) * 1000.0;
}

HrHrv hr_hrv(std::span<const double> ibis, HrvMetric metric) {
  return {heart_rate(ibis), heart_rate_variability(ibis, metric)};
}

HrErrors hr_hrv_errors(std::span<const Index> pred, std::span<const Index> gt, double fs, HrvMetric metric) {
  if (gt.size() < 2) throw Error(ErrorCode::kGroundTruthDegenerate, "ground truth needs at least two peaks");
  const auto gt_ibis = intervals(gt, fs);
  const auto pred_ibis = intervals(pred, fs);
  HrErrors e;

  if (pred_ibis.empty()) {
    e.excluded.push_back("HR");
  } else {
    const double hr_gt = heart_rate(gt_ibis);
    const double diff = std::abs(heart_rate(pred_ibis) - hr_gt);
    e.hr_mae = diff;
    e.hr_mape = diff / hr_gt * 100.0;
  }

  if (pred_ibis.size() < 2 || gt_ibis.size() < 2) {
    e.excluded.push_back("HRV");
  } else {
    const double hrv_gt = heart_rate_variability(gt_ibis, metric);
    const double diff = std::abs(heart_rate_variability(pred_ibis, metric) - hrv_gt);
    e.hrv_mae = diff;
    if (hrv_gt > 0.0) {
      e.hrv_mape = diff / hrv_gt * 100.0;
    } else {
      e.excluded.push_back("HRV_MAPE");
    }
  }
  return e;
}

ScoreReport score_segment(const std::string& segment_id, const std::string& detector, std::span<const Index> pred,
                          std::span<const Index> gt, double fs, const TolerancePolicy& policy, HrvMetric metric) {
  ScoreReport r{segment_id, detector, policy.to_string(), prf(match_peaks(pred, gt, fs, policy)), {}};
  if (gt.size() < 2) {
    r.errors.excluded = {"GT"};
  } else {
    r.errors = hr_hrv_errors(pred, gt, fs, metric);
  }
  return r;
}

std::string score_csv_header() {
  return "segment_id,detector,policy,precision,recall,f1,hr_mae,hr_mape,hrv_mae,hrv_mape,excluded_flags";
}

std::string score_csv_row(const ScoreReport& r) {
  std::ostringstream os;
  os << r.segment_id << ',' << r.detector << ',' << r.policy << ',' << format_real(r.prf.precision) << ','
     << format_real(r.prf.recall) << ',' << format_real(r.prf.f1) << ',' << opt_field(r.errors.hr_mae) << ','
     << opt_field(r.errors.hr_mape) << ',' << opt_field(r.errors.hrv_mae) << ',' << opt_field(r.errors.hrv_mape)
     << ',' << join(r.errors.excluded, '|');
  return os.str();
}

void RunningStats::add(double x) {
  ++n;
  const double d = x - mean;
  mean += d / static_cast<double>(n);
  m2 += d * (x - mean);
}

void RunningStats::merge(const RunningStats& other) {
  if (other.n == 0) return;
  if (n == 0) {
    *this = other;
    return;
  }
  const double total = static_cast<double>(n + other.n);
  const double d = other.mean - mean;
  mean += d * static_cast<double>(other.n) / total;
  m2 += other.m2 + d * d * static_cast<double>(n) * static_cast<double>(other.n) / total;
  n += other.n;
}

double RunningStats::sample_std() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"precision", "recall",  "f1",      "hr_mae",
                                                 "hr_mape",   "hrv_mae", "hrv_mape"};
  return names;
}

namespace {

std::optional<double> metric_value(const ScoreReport& r, const std::string& metric) {
  if (metric == "precision") return r.prf.precision;
  if (metric == "recall") return r.prf.recall;
  if (metric == "f1") return r.prf.f1;
  if (metric == "hr_mae") return r.errors.hr_mae;
  if (metric == "hr_mape") return r.errors.hr_mape;
  if (metric == "hrv_mae") return r.errors.hrv_mae;
  if (metric == "hrv_mape") return r.errors.hrv_mape;
  throw Error(ErrorCode::kInvalidSpec, "unknown metric '" + metric + "'");
}

}  // namespace

std::vector<double> metric_column(const std::vector<ScoreReport>& reports, const std::string& metric) {
  std::vector<double> out;
  for (const auto& r : reports)
    if (const auto v = metric_value(r, metric)) out.push_back(*v);
  return out;
}

std::vector<MetricSummary> aggregate_by_fold(const std::vector<ScoreReport>& reports, const std::vector<int>& fold_of) {
  if (fold_of.size() != reports.size()) throw Error(ErrorCode::kAlignmentError, "one fold per report required");
  std::vector<MetricSummary> out;
  for (const auto& metric : metric_names()) {
    std::map<int, RunningStats> per_fold;
    MetricSummary s{metric};
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (const auto v = metric_value(reports[i], metric)) {
        per_fold[fold_of[i]].add(*v);
      } else {
        ++s.excluded;
      }
    }
    RunningStats across;
    for (const auto& [fold, stats] : per_fold) across.add(stats.mean);
    s.mean = across.mean;
    s.std = across.sample_std();
    s.folds = across.n;
    out.push_back(s);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (const auto& [subject, fold] : fold_of) ++sizes[static_cast<std::size_t>(fold)];
  return sizes;
}

FoldAssignment cv_split(std::span<const std::string> subject_ids, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidSpec, "k must be at least 2");
  std::vector<std::string> subjects(subject_ids.begin(), subject_ids.end());
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (subjects.size() < static_cast<std::size_t>(k))
    throw Error(ErrorCode::kTooFewSubjects,
                std::to_string(subjects.size()) + " subjects for " + std::to_string(k) + " folds");

  Rng rng(seed);
  for (std::size_t i = subjects.size() - 1; i > 0; --i) std::swap(subjects[i], subjects[rng.below(i + 1)]);

  FoldAssignment fa{k, seed, {}};
  for (std::size_t i = 0; i < subjects.size(); ++i) fa.fold_of[subjects[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return fa;
}

double student_t_two_tailed_p(double t, double dof) {
  if (!(dof > 0.0)) throw Error(ErrorCode::kInvalidSpec, "dof must be positive");
  if (t == 0.0) return 1.0;
  if (std::isinf(t)) return 0.0;
  const double x = dof / (dof + t * t);
  return std::clamp(boost::math::ibeta(dof / 2.0, 0.5, x), 0.0, 1.0);
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::kDegenerateSample, "each sample needs at least two values");
  const double va = sample_variance(a) / static_cast<double>(a.size());
  const double vb = sample_variance(b) / static_cast<double>(b.size());
  const double se2 = va + vb;
  if (!(se2 > 0.0)) throw Error(ErrorCode::kDegenerateSample, "both samples have zero variance");
  const double t = (mean_of(a) - mean_of(b)) / std::sqrt(se2);
  const double dof = se2 * se2 /
                     (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  return {t, dof, student_t_two_tailed_p(t, dof)};
}

std::string stats_csv_header() { return "metric,t,dof,p"; }

std::string stats_csv_row(const std::string& metric, const WelchResult& w) {
  return metric + ',' + format_real(w.t_stat) + ',' + format_real(w.dof) + ',' + format_real(w.p_two_tailed);
}

std::vector<NoiseRow> noise_sweep(const SignalSegment& seg, const DetectorConfig& detector,
                                  std::span<const double> sigmas, std::uint64_t seed, const TolerancePolicy& policy) {
  if (!seg.preprocessed) throw Error(ErrorCode::kNotPreprocessed, seg.segment_id);
  std::vector<double> levels{0.0};
  for (const double s : sigmas) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw Error(ErrorCode::kInvalidSpec, "noise sigma must be >= 0");
    levels.push_back(s);
  }
  const auto name = std::string(to_string(detector.algorithm));
  std::vector<NoiseRow> rows;
  for (const double sigma : levels) {
    SignalSegment noisy = seg;
    Rng rng(seed);
    for (auto& v : noisy.samples) v += sigma * rng.normal();
    const auto pred = detect(noisy, detector);
    rows.push_back({sigma, score_segment(seg.segment_id, name, pred, seg.gt_peaks, seg.fs, policy)});
  }
  return rows;
}

}  // namespace peakrep
