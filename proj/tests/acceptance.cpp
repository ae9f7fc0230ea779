// Prints one PASS/FAIL line per acceptance criterion and exits non-zero if
// any of them fails. Every criterion also has a wall-clock budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mutations.hpp"
#include "oracles.hpp"
#include "peakrep/audit.hpp"
#include "peakrep/detectors.hpp"
#include "peakrep/evaluation.hpp"
#include "peakrep/preprocess.hpp"
#include "peakrep/reconstruction.hpp"
#include "peakrep/representation.hpp"
#include "peakrep/reward.hpp"
#include "peakrep/rng.hpp"
#include "peakrep/signal.hpp"

using namespace peakrep;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail = what;
    pass = false;
  }
};

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

SignalSegment synth(Modality m, std::uint64_t seed, double ibi, double jitter, double noise = 0.0) {
  SynthSpec s;
  s.modality = m;
  s.rng_seed = seed;
  s.mean_ibi_s = ibi;
  s.ibi_jitter_frac = jitter;
  s.noise_sigma = noise;
  s.segment_id = std::string(to_string(m)) + "-" + std::to_string(seed);
  return preprocess_segment(synthesize_segment(s), FilterSpec{});
}

Outcome timestamp_example() {
  Outcome o;
  const auto ts = index_to_timestamp(97);
  o.require(ts == "2020-01-01 00:01:37", "encoded as " + ts);
  o.require(timestamp_to_index(ts) == 97, "decoded to " + std::to_string(timestamp_to_index(ts)));
  if (o.pass) o.detail = "97 <-> " + ts;
  return o;
}

Outcome reward_closed_forms() {
  Outcome o;
  const IndexList gt{50, 150, 250, 350};
  std::vector<std::string> ts;
  for (const Index g : gt) ts.push_back(index_to_timestamp(g));
  ModelOutput perfect;
  perfect.status = ParseStatus::kOk;
  perfect.peak_label = "R";
  perfect.timestamps = ts;
  const auto scored = score_model_output(format_model_output(perfect), gt, 100.0, TimeScale{}, "R");
  o.require(scored.reward.total == 1.0, "perfect total " + fmt(scored.reward.total, 17));
  const double c = complete_reward(3, 4);
  o.require(std::fabs(c - std::exp(-1.0)) <= 1e-12, "complete at |d|=1: " + fmt(c, 17));
  // 60 samples apart at fs 63 is 63 bpm against a 60 bpm truth: exactly 5% high
  const IndexList gt63{0, 63, 126, 189};
  const IndexList pred63{0, 60, 120, 180};
  const double h = hr_consistency_reward(pred63, gt63, 63.0);
  o.require(std::fabs(h - std::exp(-0.1)) <= 1e-12, "hr at 5%: " + fmt(h, 17));
  if (o.pass) o.detail = "total=1, e^-1, e^-0.1";
  return o;
}

Outcome matching_oracle() {
  Outcome o;
  Rng rng(31337);
  const int trials = 1500;
  int agree = 0;
  for (int t = 0; t < trials; ++t) {
    const double fs = std::array{50.0, 100.0, 125.0, 250.0}[rng.below(4)];
    auto draw = [&](std::size_t count) {
      std::set<Index> s;
      while (s.size() < count) s.insert(static_cast<Index>(rng.below(150)));
      return IndexList(s.begin(), s.end());
    };
    const auto gt = draw(rng.below(13));
    const auto pred = draw(rng.below(13));
    const auto policy = rng.below(2) ? TolerancePolicy::fixed_ms(5.0 + rng.uniform() * 200.0)
                                     : TolerancePolicy::relative_pct(1.0 + rng.uniform() * 50.0);
    // tolerance radius from the definition, independent of the library
    std::vector<double> tol;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (policy.kind == ToleranceKind::kFixedMs) {
        tol.push_back(policy.value / 1000.0);
      } else {
        double ibi = 1.0;
        if (i > 0) ibi = (gt[i] - gt[i - 1]) / fs;
        else if (gt.size() > 1) ibi = (gt[1] - gt[0]) / fs;
        tol.push_back(policy.value / 100.0 * ibi);
      }
    }
    const auto feasible = [&](int p, int g) { return std::abs(pred[p] - gt[g]) <= tol[g] * fs * (1.0 + 1e-12); };
    const int best = oracle::max_matching(static_cast<int>(gt.size()), static_cast<int>(pred.size()), feasible);
    if (match_peaks(pred, gt, fs, policy).tp == static_cast<std::size_t>(best)) ++agree;
  }
  o.require(agree == trials, std::to_string(trials - agree) + " of " + std::to_string(trials) + " disagree");
  if (o.pass) o.detail = std::to_string(agree) + "/" + std::to_string(trials) + " instances";
  return o;
}

/// Peak amplitude of the middle half of a filtered tone.
double steady_gain(double freq, std::size_t n) {
  const FilterSpec spec;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / spec.fs);
  const auto y = butterworth_bandpass(x, spec);
  double peak = 0.0;
  for (std::size_t i = n / 4; i < 3 * n / 4; ++i) peak = std::max(peak, std::fabs(y[i]));
  return peak;
}

Outcome filter_correctness() {
  Outcome o;
  const double g5 = steady_gain(5.0, 6000);
  const double g_low = steady_gain(0.05, 120000);
  const double g40 = steady_gain(40.0, 6000);
  o.require(g5 >= 0.95 && g5 <= 1.05, "5 Hz gain " + fmt(g5));
  o.require(g_low < 0.05, "0.05 Hz gain " + fmt(g_low));
  o.require(g40 < 0.05, "40 Hz gain " + fmt(g40));

  const FilterSpec spec;
  const auto seg = synthesize_segment(SynthSpec{.modality = Modality::kECG, .noise_sigma = 0.3, .rng_seed = 11});
  const auto tf = oracle::butter_bandpass(spec.order, spec.low_hz, spec.high_hz, spec.fs);
  const auto ref = oracle::filtfilt(tf, seg.samples, 3 * static_cast<std::size_t>(spec.order + 1));
  const auto got = butterworth_bandpass(seg.samples, spec);
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::fabs(got[i] - ref[i]));
  o.require(got.size() == ref.size() && worst <= 1e-6, "reference deviation " + fmt(worst));
  if (o.pass)
    o.detail = "gain 5Hz=" + fmt(g5, 4) + " 0.05Hz=" + fmt(g_low, 3) + " 40Hz=" + fmt(g40, 3) + " ref dev=" + fmt(worst, 2);
  return o;
}

Outcome representation_properties() {
  Outcome o;
  const std::vector<int> distances{0, 2, 5, 10};
  double min_pearson = 1.0;
  int segments = 0;
  for (int m = 0; m < 5; ++m) {
    const auto modality = static_cast<Modality>(m);
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto seg = synth(modality, 2000 + s, 0.6 + 0.1 * static_cast<double>(s % 7), 0.1);
      const auto rows = distance_sensitivity_sweep(seg, distances);
      const auto& d0 = rows.front().report;
      const std::string where = std::string(to_string(modality)) + " seed " + std::to_string(2000 + s);
      o.require(d0.prominent_recall == 1.0, where + " recall " + fmt(d0.prominent_recall));
      o.require(d0.pearson_r >= 0.999, where + " pearson " + fmt(d0.pearson_r));
      min_pearson = std::min(min_pearson, d0.pearson_r);
      for (std::size_t k = 1; k < rows.size(); ++k) {
        o.require(rows[k].report.retention <= rows[k - 1].report.retention,
                  where + " retention rises at d=" + std::to_string(rows[k].distance));
        o.require(rows[k].report.mae >= rows[k - 1].report.mae,
                  where + " mae falls at d=" + std::to_string(rows[k].distance) + " (" +
                      fmt(rows[k - 1].report.mae, 10) + " -> " + fmt(rows[k].report.mae, 10) + ")");
      }
      ++segments;
    }
  }
  if (o.pass) o.detail = std::to_string(segments) + " segments, min pearson " + fmt(min_pearson, 6);
  return o;
}

Outcome detector_sanity() {
  Outcome o;
  const std::pair<Algorithm, Modality> home[] = {{Algorithm::kPanTompkins, Modality::kECG},
                                                 {Algorithm::kNabian, Modality::kECG},
                                                 {Algorithm::kElgendi, Modality::kPPG},
                                                 {Algorithm::kBishop, Modality::kPPG},
                                                 {Algorithm::kChoi, Modality::kBCG}};
  const std::vector<double> sigmas{0.1, 0.2, 0.3, 0.4, 0.5};
  const int n = 100;
  std::ostringstream summary;
  for (const auto& [algo, modality] : home) {
    DetectorConfig cfg;
    cfg.algorithm = algo;
    double clean = 0.0, at_low = 0.0, at_high = 0.0;
    for (int s = 0; s < n; ++s) {
      const auto seg = synth(modality, 1000 + static_cast<std::uint64_t>(s), 0.7 + 0.5 * (s % 5) / 4.0, 0.1);
      clean += prf(match_peaks(detect(seg, cfg), seg.gt_peaks, seg.fs, TolerancePolicy::fixed_ms(30))).f1;
      const auto rows = noise_sweep(seg, cfg, sigmas, 7 + static_cast<std::uint64_t>(s), TolerancePolicy::fixed_ms(30));
      at_low += rows[1].report.prf.f1;
      at_high += rows[5].report.prf.f1;
    }
    clean /= n;
    at_low /= n;
    at_high /= n;
    const std::string name(to_string(algo));
    o.require(clean >= 0.95, name + " clean F1 " + fmt(clean, 4));
    o.require(at_high <= at_low, name + " F1 at 0.5 (" + fmt(at_high, 4) + ") above F1 at 0.1 (" + fmt(at_low, 4) + ")");
    summary << name << "=" << fmt(clean, 4) << "/" << fmt(at_low, 4) << "/" << fmt(at_high, 4) << " ";
  }
  if (o.pass) o.detail = "F1 clean/0.1/0.5: " + summary.str();
  return o;
}

Outcome welch() {
  Outcome o;
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
  const auto w = welch_t_test(a, b);
  o.require(w.t_stat == -1.0 && w.dof == 8.0, "t=" + fmt(w.t_stat, 17) + " dof=" + fmt(w.dof, 17));
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double t = 0.25 * (i % 10) + 0.1 * (i / 10);
    const double dof = std::array{1.0, 3.0, 8.0, 25.0, 120.0}[i / 10];
    worst = std::max(worst, std::fabs(student_t_two_tailed_p(t, dof) - oracle::t_two_tailed_p(t, dof)));
    worst = std::max(worst, std::fabs(student_t_two_tailed_p(-t, dof) - oracle::t_two_tailed_p(-t, dof)));
  }
  o.require(worst <= 1e-8, "grid deviation " + fmt(worst));
  o.require(welch_t_test(a, a).p_two_tailed == 1.0, "identical samples p != 1");
  if (o.pass) o.detail = "t=-1 dof=8, grid dev " + fmt(worst, 2);
  return o;
}

Outcome audit_self_consistency() {
  Outcome o;
  std::vector<SignalSegment> segs;
  std::vector<PeakRepresentation> reps;
  std::vector<std::string> outs;
  for (std::uint64_t s = 0; s < 40; ++s) {
    const auto seg = synth(static_cast<Modality>(s % 5), 3000 + s, 0.7 + 0.05 * static_cast<double>(s % 7), 0.1, 0.1);
    for (const int d : {0, 2, 5, 10}) {
      segs.push_back(seg);
      reps.push_back(build_representation(seg, d));
      outs.push_back(faithful_output(reps.back(), seg.gt_peaks, default_peak_label(seg.modality)));
    }
  }
  const auto bundle = build_audit_bundle(segs, reps, outs);
  o.require(bundle.summary.rejected == 0,
            std::to_string(bundle.summary.rejected) + " of " + std::to_string(bundle.summary.records) + " rejected");

  int tripped = 0;
  for (const auto kind : mutation::kAll) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto& seg = segs[4 * s + s % 3];
      const auto& rep = reps[4 * s + s % 3];
      const auto mutated = mutation::apply(kind, outs[4 * s + s % 3], rep);
      const std::string where = std::string(mutation::target_check(kind)) + " fixture " + std::to_string(s);
      if (!mutated) {
        o.require(false, where + " could not be injected");
        continue;
      }
      const auto failed =
          factual_consistency_check(parse_model_output(*mutated, default_peak_label(seg.modality)), rep, seg).failed();
      const bool exact = failed == std::vector<std::string>{mutation::target_check(kind)};
      o.require(exact, where + " tripped " + std::to_string(failed.size()) + " checks");
      tripped += exact;
    }
  }
  if (o.pass)
    o.detail = "0/" + std::to_string(bundle.summary.records) + " faithful rejected, " + std::to_string(tripped) +
               "/100 mutations exact";
  return o;
}

Outcome grammar_round_trips() {
  Outcome o;
  Rng rng(4242);
  int reps_ok = 0, outputs_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    PeakRepresentation rep;
    Index idx = -1;
    for (std::uint64_t k = rng.below(40); k > 0; --k) {
      idx += 1 + static_cast<Index>(rng.below(30));
      const double amp = std::round(rng.uniform(-50.0, 50.0) * 1e6) / 1e6;
      rep.entries.push_back({idx, amp, Polarity::kNone, index_to_timestamp(idx)});
    }
    const auto text = serialize(rep);
    const auto back = parse_serialized(text);
    bool same = back.entries.size() == rep.entries.size() && serialize(back) == text;
    for (std::size_t k = 0; same && k < rep.entries.size(); ++k)
      same = back.entries[k].index == rep.entries[k].index && back.entries[k].amplitude == rep.entries[k].amplitude &&
             back.entries[k].timestamp == rep.entries[k].timestamp;
    reps_ok += same;
  }
  for (int i = 0; i < 1000; ++i) {
    ModelOutput out;
    out.status = ParseStatus::kOk;
    out.peak_label = std::array{"R", "SP", "J", "P", "R_peak"}[rng.below(5)];
    std::int64_t s = static_cast<std::int64_t>(rng.below(100));
    for (std::uint64_t k = rng.below(12); k > 0; --k) {
      out.timestamps.push_back(seconds_to_timestamp(s));
      s += 1 + static_cast<std::int64_t>(rng.below(300));
    }
    if (rng.below(2)) out.explanation = "Selected " + std::to_string(out.timestamps.size()) + " peaks {see 00:00:01}";
    const auto text = format_model_output(out);
    const auto back = parse_model_output(text, out.peak_label);
    outputs_ok += back.status == ParseStatus::kOk && back.peak_label == out.peak_label &&
                  back.timestamps == out.timestamps && back.explanation == out.explanation &&
                  format_model_output(back) == text;
  }
  o.require(reps_ok == 1000, std::to_string(1000 - reps_ok) + " representation round trips differ");
  o.require(outputs_ok == 1000, std::to_string(1000 - outputs_ok) + " answer round trips differ");
  if (o.pass) o.detail = "1000 representations, 1000 answers";
  return o;
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"timestamp_worked_example", 0.001, timestamp_example},
      {"reward_closed_forms", 0.001, reward_closed_forms},
      {"matching_oracle_equivalence", 30.0, matching_oracle},
      {"filter_correctness", 5.0, filter_correctness},
      {"representation_properties", 60.0, representation_properties},
      {"detector_sanity", 300.0, detector_sanity},
      {"welch_t_test", 5.0, welch},
      {"audit_self_consistency", 10.0, audit_self_consistency},
      {"grammar_round_trips", 10.0, grammar_round_trips},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("threw: ") + e.what();
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > c.budget_s) out.require(false, "over budget of " + fmt(c.budget_s) + " s");
    failures += !out.pass;
    std::printf("%s %-30s %10.3f ms  %s\n", out.pass ? "PASS" : "FAIL", c.name, elapsed * 1e3, out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
