#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "peakrep/app.hpp"
#include "peakrep/audit.hpp"
#include "peakrep/reconstruction.hpp"
#include "peakrep/rng.hpp"
#include "peakrep/server.hpp"

namespace peakrep {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Globals {
  std::string config;
  std::optional<std::string> out;
  std::optional<unsigned> jobs;
  std::optional<std::uint64_t> seed;
};

/// Options shared by the subcommands that read segment files.
struct InputFlags {
  std::vector<std::string> inputs;
  std::optional<std::string> format;
  std::optional<double> fs;
  std::optional<std::string> modality;
  std::optional<std::string> subject;
};

/// State handed to every subcommand: the effective configuration and the
/// files it read and wrote, which end up in the manifest.
struct Run {
  RunConfig cfg;
  std::string subcommand;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;

  fs::path out_dir() {
    fs::create_directories(cfg.out);
    return cfg.out;
  }
  fs::path output(const std::string& name) {
    auto p = out_dir() / name;
    outputs.push_back(p);
    return p;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kFileNotFound, "cannot write " + path.string());
  out << text;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + '\n';
  write_text(path, text);
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<ordered_json> read_jsonl(const fs::path& path) {
  std::vector<ordered_json> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(ordered_json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(n, path.string() + ": " + e.what());
    }
  }
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_same_v<T, int>) {
        out.push_back(std::stoi(item, &used));
      } else {
        out.push_back(std::stod(item, &used));
      }
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfigError, std::string("bad ") + what + " list '" + text + "'");
    }
  }
  return out;
}

std::vector<SignalSegment> load_inputs(Run& run) {
  if (run.cfg.inputs.empty()) throw Error(ErrorCode::kConfigError, "no input given (--in or config inputs)");
  std::vector<SignalSegment> all;
  for (const auto& path : run.cfg.inputs) {
    auto segs = load_segments(path, run.cfg.input_format, run.cfg.csv);
    run.inputs.emplace_back(path);
    if (run.cfg.input_format == SegmentFormat::kCsv) {
      fs::path sidecar = fs::path(path).replace_extension(".peaks.csv");
      if (fs::exists(sidecar)) run.inputs.push_back(sidecar);
    }
    for (auto& s : segs) all.push_back(std::move(s));
  }
  return all;
}

std::vector<DetectorConfig> detectors_for(const RunConfig& cfg, const std::string& algo) {
  std::vector<DetectorConfig> out;
  auto configured = [&](Algorithm a) {
    for (const auto& d : cfg.detectors)
      if (d.algorithm == a) return d;
    DetectorConfig d;
    d.algorithm = a;
    return d;
  };
  if (algo.empty()) {
    if (!cfg.detectors.empty()) return cfg.detectors;
    for (const auto a : all_algorithms()) out.push_back(configured(a));
  } else if (algo == "all") {
    for (const auto a : all_algorithms()) out.push_back(configured(a));
  } else {
    try {
      out.push_back(configured(algorithm_from_string(algo)));
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, e.what());
    }
  }
  return out;
}

struct Detection {
  IndexList peaks;
  std::optional<ErrorCode> failure;
};

/// Per-segment detector failures become an empty prediction flagged in the
/// score row, so one unusable segment does not abort a batch.
Detection detect_or_flag(const SignalSegment& seg, const DetectorConfig& cfg) {
  try {
    return {detect(seg, cfg), std::nullopt};
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kNoPeriodFound:
      case ErrorCode::kUnsupportedRate:
      case ErrorCode::kTooShort: return {{}, e.code()};
      default: throw;
    }
  }
}

ScoreReport score_detection(const SignalSegment& seg, const std::string& detector, const Detection& d,
                            const RunConfig& cfg) {
  auto r = score_segment(seg.segment_id, detector, d.peaks, seg.gt_peaks, seg.fs, cfg.tolerance, cfg.hrv);
  if (d.failure) r.errors.excluded.insert(r.errors.excluded.begin(), "DETECTOR_" + std::string(to_string(*d.failure)));
  return r;
}

std::string mean_of(const std::vector<double>& v) {
  if (v.empty()) return "";
  RunningStats s;
  for (const double x : v) s.add(x);
  return format_real(s.mean);
}

// --- subcommands ---------------------------------------------------------

struct SynthFlags {
  std::string modality = "ECG";
  std::size_t count = 10;
  double fs = 100.0;
  std::size_t duration = 1000;
  double ibi = 1.0;
  double ibi_spread = 0.0;
  double jitter = 0.05;
  double noise = 0.0;
  std::size_t subjects = 0;
};

void cmd_synth(Run& run, const SynthFlags& f) {
  Modality modality;
  try {
    modality = modality_from_string(f.modality);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
  if (f.count == 0) throw Error(ErrorCode::kConfigError, "--count must be positive");
  if (!(f.ibi_spread >= 0.0 && f.ibi_spread < 1.0)) throw Error(ErrorCode::kConfigError, "--ibi-spread must be in [0,1)");
  const std::size_t subjects = f.subjects ? f.subjects : f.count;
  std::vector<SynthSpec> specs;
  Rng rng(run.cfg.seed);
  for (std::size_t k = 0; k < f.count; ++k) {
    SynthSpec s;
    s.modality = modality;
    s.fs = f.fs;
    s.duration_samples = f.duration;
    s.mean_ibi_s = f.ibi * (1.0 + f.ibi_spread * (2.0 * rng.uniform() - 1.0));
    s.ibi_jitter_frac = f.jitter;
    s.noise_sigma = f.noise;
    s.rng_seed = rng.next_u64();
    s.segment_id = "synth-" + std::string(to_string(modality)) + "-" + std::to_string(k);
    s.subject_id = "subject-" + std::to_string(k % subjects);
    specs.push_back(std::move(s));
  }
  const auto segs = parallel_map(specs, run.cfg.jobs, [](const SynthSpec& s) { return synthesize_segment(s); });
  write_segments(run.output("segments.jsonl"), segs);
}

void cmd_preprocess(Run& run) {
  const auto recordings = load_inputs(run);
  std::vector<SignalSegment> windows;
  for (const auto& r : recordings) {
    if (r.samples.size() <= run.cfg.window_len) {
      windows.push_back(r);
    } else {
      for (auto& w : segment_windows(r, run.cfg.window_len)) windows.push_back(std::move(w));
    }
  }
  const auto out = parallel_map(windows, run.cfg.jobs,
                                [&](const SignalSegment& s) { return preprocess_segment(s, run.cfg.filter); });
  write_segments(run.output("preprocessed.jsonl"), out);
}

void cmd_represent(Run& run) {
  const auto segs = load_inputs(run);
  const auto lines = parallel_map(segs, run.cfg.jobs, [&](const SignalSegment& s) {
    const auto rep = build_representation(s, run.cfg.min_distance, run.cfg.ts_scale);
    ordered_json j;
    j["segment_id"] = s.segment_id;
    j["fs"] = s.fs;
    j["ts_scale"] = rep.scale.to_string();
    j["min_distance"] = rep.min_distance;
    j["retention"] = retention_ratio(rep, s);
    j["text"] = serialize(rep);
    return j.dump();
  });
  write_lines(run.output("representations.jsonl"), lines);
}

void cmd_reconstruct(Run& run, bool series) {
  const auto segs = load_inputs(run);
  struct Result {
    std::string row;
    std::vector<std::string> series;
  };
  const auto results = parallel_map(segs, run.cfg.jobs, [&](const SignalSegment& s) {
    const auto rep = build_representation(s, run.cfg.min_distance, run.cfg.ts_scale);
    const auto recon =
        spline_reconstruct(rep, s.samples.size(), std::make_pair(s.samples.front(), s.samples.back()));
    const auto fid = fidelity_metrics(s.samples, recon);
    Result r;
    r.row = s.segment_id + ',' + std::to_string(run.cfg.min_distance) + ',' + format_real(retention_ratio(rep, s)) +
            ',' + format_real(fid.mae) + ',' + format_real(fid.rmse) + ',' + format_real(fid.pearson) + ',' +
            format_real(prominent_peak_recall(rep, s.gt_peaks));
    if (series)
      for (std::size_t i = 0; i < recon.size(); ++i)
        r.series.push_back(s.segment_id + ',' + std::to_string(i) + ',' + format_real(s.samples[i]) + ',' +
                           format_real(recon[i]));
    return r;
  });
  std::vector<std::string> rows{"segment_id,min_distance,retention,mae,rmse,pearson,recall"};
  std::vector<std::string> points{"segment_id,index,original,reconstruction"};
  for (const auto& r : results) {
    rows.push_back(r.row);
    points.insert(points.end(), r.series.begin(), r.series.end());
  }
  write_lines(run.output("fidelity.csv"), rows);
  if (series) write_lines(run.output("reconstruction_series.csv"), points);
}

void cmd_sweep_distance(Run& run) {
  const auto segs = load_inputs(run);
  const auto sweeps = parallel_map(segs, run.cfg.jobs, [&](const SignalSegment& s) {
    return distance_sensitivity_sweep(s, run.cfg.distances, 1, run.cfg.ts_scale);
  });
  std::vector<std::string> rows{"segment_id," + sweep_csv_header()};
  std::map<int, std::vector<FidelityReport>> by_distance;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    for (const auto& row : sweeps[i]) {
      rows.push_back(segs[i].segment_id + ',' + sweep_csv_row(row));
      by_distance[row.distance].push_back(row.report);
    }
  }
  std::vector<std::string> summary{"distance,mean_retention,mean_mae,mean_rmse,mean_pearson,mean_recall"};
  for (const auto& [d, reports] : by_distance) {
    std::vector<double> ret, mae, rmse, r, rec;
    for (const auto& x : reports) {
      ret.push_back(x.retention);
      mae.push_back(x.mae);
      rmse.push_back(x.rmse);
      r.push_back(x.pearson_r);
      rec.push_back(x.prominent_recall);
    }
    summary.push_back(std::to_string(d) + ',' + mean_of(ret) + ',' + mean_of(mae) + ',' + mean_of(rmse) + ',' +
                      mean_of(r) + ',' + mean_of(rec));
  }
  write_lines(run.output("distance_sweep.csv"), rows);
  write_lines(run.output("distance_sweep_summary.csv"), summary);
}

void cmd_detect(Run& run, const std::string& algo) {
  const auto segs = load_inputs(run);
  for (const auto& det : detectors_for(run.cfg, algo)) {
    const auto name = std::string(to_string(det.algorithm));
    const auto found = parallel_map(segs, run.cfg.jobs, [&](const SignalSegment& s) { return detect_or_flag(s, det); });
    std::vector<std::string> detections, scores{score_csv_header()};
    for (std::size_t i = 0; i < segs.size(); ++i) {
      ordered_json j;
      j["segment_id"] = segs[i].segment_id;
      j["detector"] = name;
      j["peaks"] = found[i].peaks;
      if (found[i].failure) j["failure"] = std::string(to_string(*found[i].failure));
      detections.push_back(j.dump());
      scores.push_back(score_csv_row(score_detection(segs[i], name, found[i], run.cfg)));
    }
    write_lines(run.output("detections_" + name + ".jsonl"), detections);
    write_lines(run.output("scores_" + name + ".csv"), scores);
  }
}

void cmd_score(Run& run, const std::string& pred_path) {
  const auto segs = load_inputs(run);
  std::map<std::string, const SignalSegment*> by_id;
  for (const auto& s : segs) by_id[s.segment_id] = &s;
  run.inputs.emplace_back(pred_path);
  std::vector<std::string> rows{score_csv_header()};
  std::size_t line = 0;
  for (const auto& rec : read_jsonl(pred_path)) {
    ++line;
    std::string id, detector = "external";
    IndexList peaks;
    try {
      id = rec.at("segment_id").get<std::string>();
      peaks = rec.at("peaks").get<IndexList>();
      if (rec.contains("detector")) detector = rec.at("detector").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(line, pred_path + ": " + e.what());
    }
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::kAlignmentError, "prediction for unknown segment '" + id + "'");
    rows.push_back(score_csv_row(
        score_segment(id, detector, peaks, it->second->gt_peaks, it->second->fs, run.cfg.tolerance, run.cfg.hrv)));
  }
  write_lines(run.output("scores.csv"), rows);
}

struct ScoreTable {
  std::vector<ScoreReport> reports;
};

std::optional<double> opt_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

ScoreTable read_score_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != score_csv_header())
    throw FormatError(1, path.string() + ": expected header " + score_csv_header());
  ScoreTable t;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(lines[i]);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!lines[i].empty() && lines[i].back() == ',') f.emplace_back();
    if (f.size() != 11) throw FormatError(i + 1, path.string() + ": expected 11 columns");
    try {
      ScoreReport r;
      r.segment_id = f[0];
      r.detector = f[1];
      r.policy = f[2];
      r.prf = {std::stod(f[3]), std::stod(f[4]), std::stod(f[5])};
      r.errors.hr_mae = opt_number(f[6]);
      r.errors.hr_mape = opt_number(f[7]);
      r.errors.hrv_mae = opt_number(f[8]);
      r.errors.hrv_mape = opt_number(f[9]);
      t.reports.push_back(std::move(r));
    } catch (const std::exception&) {
      throw FormatError(i + 1, path.string() + ": bad number");
    }
  }
  return t;
}

struct StatsFlags {
  std::string a, b;
  std::string metrics = "f1,precision,recall,hr_mae,hrv_mae";
  std::string folds;
};

void cmd_stats(Run& run, const StatsFlags& f) {
  const auto a = read_score_csv(f.a);
  const auto b = read_score_csv(f.b);
  run.inputs.emplace_back(f.a);
  run.inputs.emplace_back(f.b);
  std::vector<std::string> metrics;
  {
    std::stringstream ss(f.metrics);
    std::string m;
    while (std::getline(ss, m, ',')) {
      if (std::find(metric_names().begin(), metric_names().end(), m) == metric_names().end())
        throw Error(ErrorCode::kConfigError, "unknown metric '" + m + "'");
      metrics.push_back(m);
    }
  }
  std::vector<std::string> rows{stats_csv_header()};
  for (const auto& m : metrics) {
    try {
      rows.push_back(stats_csv_row(m, welch_t_test(metric_column(a.reports, m), metric_column(b.reports, m))));
    } catch (const Error& e) {
      // A flat or too-small sample has no t statistic; leave the fields empty.
      if (e.code() != ErrorCode::kDegenerateSample) throw;
      rows.push_back(m + ",,,");
    }
  }

  std::vector<std::string> summary;
  if (!f.folds.empty()) {
    // folds.csv maps subjects to folds; segments map to subjects through the inputs
    const auto segs = load_inputs(run);
    run.inputs.emplace_back(f.folds);
    std::map<std::string, int> fold_of_subject;
    const auto lines = read_lines(f.folds);
    if (lines.empty() || lines[0] != "subject_id,fold") throw FormatError(1, f.folds + ": expected subject_id,fold");
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto comma = lines[i].rfind(',');
      if (comma == std::string::npos) throw FormatError(i + 1, f.folds);
      fold_of_subject[lines[i].substr(0, comma)] = std::stoi(lines[i].substr(comma + 1));
    }
    std::map<std::string, int> fold_of_segment;
    for (const auto& s : segs) {
      const auto it = fold_of_subject.find(s.subject_id);
      if (it == fold_of_subject.end()) throw Error(ErrorCode::kAlignmentError, "subject '" + s.subject_id + "' has no fold");
      fold_of_segment[s.segment_id] = it->second;
    }
    summary.push_back("side,metric,mean,std,folds,excluded");
    for (const auto& [side, table] : {std::pair{"a", &a}, std::pair{"b", &b}}) {
      std::vector<int> folds;
      for (const auto& r : table->reports) {
        const auto it = fold_of_segment.find(r.segment_id);
        if (it == fold_of_segment.end()) throw Error(ErrorCode::kAlignmentError, "segment '" + r.segment_id + "' not in inputs");
        folds.push_back(it->second);
      }
      for (const auto& s : aggregate_by_fold(table->reports, folds))
        summary.push_back(std::string(side) + ',' + s.metric + ',' + format_real(s.mean) + ',' + format_real(s.std) +
                          ',' + std::to_string(s.folds) + ',' + std::to_string(s.excluded));
    }
  }
  write_lines(run.output("stats.csv"), rows);
  if (!summary.empty()) write_lines(run.output("fold_summary.csv"), summary);
}

void cmd_noise_sweep(Run& run, const std::string& algo) {
  const auto segs = load_inputs(run);
  std::vector<std::string> rows{"sigma," + score_csv_header()};
  std::vector<std::string> summary{"detector,sigma,mean_precision,mean_recall,mean_f1,segments"};
  for (const auto& det : detectors_for(run.cfg, algo)) {
    const auto name = std::string(to_string(det.algorithm));
    std::vector<std::size_t> order(segs.size());
    std::iota(order.begin(), order.end(), 0);
    const auto sweeps = parallel_map(order, run.cfg.jobs, [&](std::size_t i) {
      const auto seed = Rng::splitmix64(run.cfg.seed + i);
      try {
        return noise_sweep(segs[i], det, run.cfg.noise_sigmas, seed, run.cfg.tolerance);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNoPeriodFound && e.code() != ErrorCode::kUnsupportedRate &&
            e.code() != ErrorCode::kTooShort)
          throw;
        // Score each level individually so one failing level does not hide the rest.
        std::vector<NoiseRow> out;
        std::vector<double> levels{0.0};
        levels.insert(levels.end(), run.cfg.noise_sigmas.begin(), run.cfg.noise_sigmas.end());
        for (const double sigma : levels) {
          SignalSegment noisy = segs[i];
          Rng rng(seed);
          for (auto& v : noisy.samples) v += sigma * rng.normal();
          out.push_back({sigma, score_detection(segs[i], name, detect_or_flag(noisy, det), run.cfg)});
        }
        return out;
      }
    });
    std::map<double, std::vector<const ScoreReport*>> by_sigma;
    std::vector<double> level_order;
    for (const auto& sweep : sweeps) {
      for (const auto& row : sweep) {
        rows.push_back(format_real(row.sigma) + ',' + score_csv_row(row.report));
        if (!by_sigma.count(row.sigma)) level_order.push_back(row.sigma);
        by_sigma[row.sigma].push_back(&row.report);
      }
    }
    for (const double sigma : level_order) {
      std::vector<double> p, r, f;
      for (const auto* rep : by_sigma[sigma]) {
        p.push_back(rep->prf.precision);
        r.push_back(rep->prf.recall);
        f.push_back(rep->prf.f1);
      }
      summary.push_back(name + ',' + format_real(sigma) + ',' + mean_of(p) + ',' + mean_of(r) + ',' + mean_of(f) + ',' +
                        std::to_string(f.size()));
    }
  }
  write_lines(run.output("noise_sweep.csv"), rows);
  write_lines(run.output("noise_sweep_summary.csv"), summary);
}

void cmd_cv_split(Run& run) {
  const auto segs = load_inputs(run);
  std::vector<std::string> subjects;
  for (const auto& s : segs) subjects.push_back(s.subject_id);
  const auto folds = cv_split(subjects, run.cfg.cv_k, run.cfg.seed);
  std::vector<std::string> rows{"subject_id,fold"};
  for (const auto& [subject, fold] : folds.fold_of) rows.push_back(subject + ',' + std::to_string(fold));
  write_lines(run.output("folds.csv"), rows);
}

void cmd_reward(Run& run) {
  if (run.cfg.inputs.empty()) throw Error(ErrorCode::kConfigError, "no input given (--in)");
  std::vector<ordered_json> records;
  for (const auto& path : run.cfg.inputs) {
    for (auto& r : read_jsonl(path)) records.push_back(std::move(r));
    run.inputs.emplace_back(path);
  }
  const auto lines = parallel_map(records, run.cfg.jobs, [&](const ordered_json& r) {
    return score_reward_record(r, run.cfg.weights, run.cfg.reward_tol_ms, run.cfg.ts_scale).dump();
  });
  write_lines(run.output("rewards.jsonl"), lines);
}

std::vector<std::string> audit_report_rows(const AuditBundle& bundle) {
  std::vector<std::string> rows{"record_id,segment_ref,overall,failed_checks,duplicate,human_label"};
  for (const auto& r : bundle.records) {
    std::string failed;
    for (const auto& name : r.rule_report.failed()) failed += (failed.empty() ? "" : "|") + name;
    rows.push_back(r.record_id + ',' + r.segment_ref + ',' + (r.rule_report.overall() ? "pass" : "fail") + ',' +
                   failed + ',' + (r.duplicate ? "true" : "false") + ',' +
                   (r.human_label ? std::string(to_string(*r.human_label)) : ""));
  }
  return rows;
}

struct AuditFlags {
  std::string outputs;
  bool faithful = false;
  double amp_tol = 0.005;
  std::optional<double> ibi_tol_s;
  std::string bundle;
  std::string labels;
};

void cmd_audit_build(Run& run, const AuditFlags& f) {
  if (f.outputs.empty() == !f.faithful)
    throw Error(ErrorCode::kConfigError, "audit-build needs exactly one of --outputs or --faithful");
  const auto segs = load_inputs(run);
  std::vector<PeakRepresentation> reps;
  for (const auto& s : segs) reps.push_back(build_representation(s, run.cfg.min_distance, run.cfg.ts_scale));

  std::vector<SignalSegment> seg_list;
  std::vector<PeakRepresentation> rep_list;
  std::vector<std::string> outputs;
  if (f.faithful) {
    for (std::size_t i = 0; i < segs.size(); ++i) {
      seg_list.push_back(segs[i]);
      rep_list.push_back(reps[i]);
      outputs.push_back(faithful_output(reps[i], segs[i].gt_peaks, default_peak_label(segs[i].modality)));
    }
  } else {
    run.inputs.emplace_back(f.outputs);
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < segs.size(); ++i) index_of[segs[i].segment_id] = i;
    std::size_t line = 0;
    for (const auto& rec : read_jsonl(f.outputs)) {
      ++line;
      std::string id, raw;
      try {
        id = rec.at("segment_id").get<std::string>();
        raw = rec.at("raw_output").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(line, f.outputs + ": " + e.what());
      }
      const auto it = index_of.find(id);
      if (it == index_of.end()) throw Error(ErrorCode::kAlignmentError, "output for unknown segment '" + id + "'");
      seg_list.push_back(segs[it->second]);
      rep_list.push_back(reps[it->second]);
      outputs.push_back(raw);
    }
  }
  AuditOptions opts{f.amp_tol, f.ibi_tol_s};
  const auto bundle = build_audit_bundle(seg_list, rep_list, outputs, {}, opts);
  write_text(run.output("bundle.json"), bundle_to_json(bundle) + '\n');
  write_lines(run.output("audit_report.csv"), audit_report_rows(bundle));
}

AuditBundle load_bundle(Run& run, const std::string& path) {
  if (path.empty()) throw Error(ErrorCode::kConfigError, "--bundle is required");
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path);
  std::stringstream ss;
  ss << in.rdbuf();
  run.inputs.emplace_back(path);
  return bundle_from_json(ss.str());
}

void cmd_audit_check(Run& run, const AuditFlags& f) {
  auto bundle = load_bundle(run, f.bundle);
  AuditOptions opts{f.amp_tol, f.ibi_tol_s};
  std::map<std::string, std::size_t> seg_index;
  for (std::size_t i = 0; i < bundle.segments.size(); ++i) seg_index[bundle.segments[i].segment_id] = i;
  for (auto& r : bundle.records) {
    const auto it = seg_index.find(r.segment_ref);
    if (it == seg_index.end()) throw Error(ErrorCode::kAlignmentError, "record " + r.record_id + " has no segment");
    r.rule_report = factual_consistency_check(r.model_output, bundle.reps[it->second], bundle.segments[it->second], opts);
  }
  if (!f.labels.empty()) {
    run.inputs.emplace_back(f.labels);
    const auto entries = LabelLog(f.labels).read();
    replay(bundle, entries);
  }
  bundle.summary = summarize(bundle);
  write_lines(run.output("audit_report.csv"), audit_report_rows(bundle));
  write_text(run.output("audit_summary.json"),
             ordered_json::parse(bundle_to_json(bundle))["summary"].dump(2) + '\n');
}

ReviewServer* g_server = nullptr;

void cmd_serve(Run& run, const AuditFlags& f) {
  auto bundle = load_bundle(run, f.bundle);
  ServerOptions opts;
  opts.label_log = f.labels.empty() ? run.out_dir() / "labels.jsonl" : fs::path(f.labels);
  opts.weights = run.cfg.weights;
  opts.reward_tol_ms = run.cfg.reward_tol_ms;
  opts.ts_scale = run.cfg.ts_scale;
  opts.static_dir = run.cfg.static_dir;
  ReviewServer server(std::move(bundle), opts);
  const int port = server.bind(run.cfg.host, run.cfg.port);
  std::cerr << ordered_json{{"event", "listening"}, {"host", run.cfg.host}, {"port", port},
                            {"label_log", opts.label_log.string()}}
                   .dump()
            << std::endl;
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  server.listen();
  g_server = nullptr;
}

void report_error(const std::string& code, const std::string& message, int exit_code) {
  std::cerr << ordered_json{{"error", code}, {"message", message}, {"exit_code", exit_code}}.dump() << std::endl;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Peak representation, detection, evaluation, reward and audit toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Globals g;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--jobs", g.jobs, "Parallel workers")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Random seed");
  app.fallthrough();

  InputFlags in;
  auto add_inputs = [&](CLI::App* sub) {
    sub->add_option("--in", in.inputs, "Input segment file(s)");
    sub->add_option("--format", in.format, "records or csv")->check(CLI::IsMember({"records", "csv"}));
    sub->add_option("--fs", in.fs, "Sampling rate for CSV input");
    sub->add_option("--modality", in.modality, "Modality for CSV input");
    sub->add_option("--subject", in.subject, "Subject id for CSV input");
  };

  SynthFlags synth;
  auto* s_synth = app.add_subcommand("synth", "Generate synthetic segments with ground truth");
  s_synth->add_option("--modality", synth.modality, "ECG, PPG, BCG, BSG or SYNTH");
  s_synth->add_option("--count", synth.count, "Number of segments");
  s_synth->add_option("--fs", synth.fs, "Sampling rate (Hz)");
  s_synth->add_option("--duration", synth.duration, "Samples per segment");
  s_synth->add_option("--ibi", synth.ibi, "Mean inter-beat interval (s)");
  s_synth->add_option("--ibi-spread", synth.ibi_spread, "Per-segment IBI spread, fraction of --ibi");
  s_synth->add_option("--jitter", synth.jitter, "Beat-to-beat jitter, fraction of IBI");
  s_synth->add_option("--noise", synth.noise, "Additive noise sigma");
  s_synth->add_option("--subjects", synth.subjects, "Number of distinct subjects (default: one per segment)");

  std::optional<std::size_t> window;
  auto* s_pre = app.add_subcommand("preprocess", "Window, band-pass and z-score segments");
  add_inputs(s_pre);
  s_pre->add_option("--window", window, "Window length in samples");

  std::optional<int> min_distance;
  std::optional<std::string> ts_scale;
  auto add_rep = [&](CLI::App* sub) {
    sub->add_option("--min-distance", min_distance, "Minimum distance between same-polarity extrema");
    sub->add_option("--ts-scale", ts_scale, "Seconds per sample index, e.g. 1 or 1/100");
  };
  auto* s_rep = app.add_subcommand("represent", "Serialize peak representations");
  add_inputs(s_rep);
  add_rep(s_rep);

  bool series = false;
  auto* s_recon = app.add_subcommand("reconstruct", "Spline reconstruction fidelity");
  add_inputs(s_recon);
  add_rep(s_recon);
  s_recon->add_flag("--series", series, "Also write per-sample reconstruction series");

  std::optional<std::string> distances;
  auto* s_sweep = app.add_subcommand("sweep-distance", "Fidelity across minimum distances");
  add_inputs(s_sweep);
  s_sweep->add_option("--distances", distances, "Comma-separated distances, e.g. 0,2,5,10");
  s_sweep->add_option("--ts-scale", ts_scale, "Seconds per sample index");

  std::string algo;
  std::optional<std::string> tolerance, hrv;
  auto add_scoring = [&](CLI::App* sub) {
    sub->add_option("--tolerance", tolerance, "fixed_ms:<ms> or relative_pct:<pct>");
    sub->add_option("--hrv", hrv, "sdnn or rmssd")->check(CLI::IsMember({"sdnn", "rmssd"}));
  };
  auto* s_detect = app.add_subcommand("detect", "Run baseline detectors and score them");
  add_inputs(s_detect);
  add_scoring(s_detect);
  s_detect->add_option("--algo", algo, "Detector name or 'all'");

  std::string pred_path;
  auto* s_score = app.add_subcommand("score", "Score predicted peaks against ground truth");
  add_inputs(s_score);
  add_scoring(s_score);
  s_score->add_option("--pred", pred_path, "Predictions (JSON lines: segment_id, peaks)")->required()->check(CLI::ExistingFile);

  StatsFlags stats;
  auto* s_stats = app.add_subcommand("stats", "Welch's t-test between two score files");
  add_inputs(s_stats);
  s_stats->add_option("--a", stats.a, "Score CSV of method A")->required()->check(CLI::ExistingFile);
  s_stats->add_option("--b", stats.b, "Score CSV of method B")->required()->check(CLI::ExistingFile);
  s_stats->add_option("--metrics", stats.metrics, "Comma-separated metrics");
  s_stats->add_option("--folds", stats.folds, "folds.csv for mean/std across folds (needs --in)")->check(CLI::ExistingFile);

  std::optional<std::string> sigmas;
  auto* s_noise = app.add_subcommand("noise-sweep", "Detector scores under additive Gaussian noise");
  add_inputs(s_noise);
  add_scoring(s_noise);
  s_noise->add_option("--algo", algo, "Detector name or 'all'");
  s_noise->add_option("--sigmas", sigmas, "Comma-separated noise levels");

  std::optional<int> k;
  auto* s_cv = app.add_subcommand("cv-split", "Subject-independent fold assignment");
  add_inputs(s_cv);
  s_cv->add_option("--k", k, "Number of folds");

  auto* s_reward = app.add_subcommand("reward", "Score model outputs with the multi-objective reward");
  s_reward->add_option("--in", in.inputs, "Batch file (JSON lines)");
  s_reward->add_option("--ts-scale", ts_scale, "Default seconds per sample index");

  AuditFlags audit;
  std::optional<double> amp_tol;
  auto add_tols = [&](CLI::App* sub) {
    sub->add_option("--amp-tol", amp_tol, "Amplitude tolerance");
    sub->add_option("--ibi-tol", audit.ibi_tol_s, "Interval tolerance in timestamp seconds (default one sample)");
  };
  auto* s_abuild = app.add_subcommand("audit-build", "Build a review bundle with rule checks");
  add_inputs(s_abuild);
  add_rep(s_abuild);
  add_tols(s_abuild);
  s_abuild->add_option("--outputs", audit.outputs, "Model outputs (JSON lines: segment_id, raw_output)")->check(CLI::ExistingFile);
  s_abuild->add_flag("--faithful", audit.faithful, "Generate outputs from the ground truth");

  auto* s_acheck = app.add_subcommand("audit-check", "Re-run rule checks and replay labels");
  s_acheck->add_option("--bundle", audit.bundle, "Bundle file")->required()->check(CLI::ExistingFile);
  s_acheck->add_option("--labels", audit.labels, "Label log to replay")->check(CLI::ExistingFile);
  add_tols(s_acheck);

  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<std::string> static_dir;
  auto* s_serve = app.add_subcommand("serve", "Serve a bundle to the review workbench");
  s_serve->add_option("--bundle", audit.bundle, "Bundle file")->required()->check(CLI::ExistingFile);
  s_serve->add_option("--labels", audit.labels, "Label log (default <out>/labels.jsonl)");
  s_serve->add_option("--host", host, "Bind address (default 127.0.0.1)");
  s_serve->add_option("--port", port, "Port (0 picks a free one)");
  s_serve->add_option("--static", static_dir, "Directory with review UI assets");
  add_rep(s_serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report_error("ConfigError", e.what(), 2);
    return 2;
  }

  Run run;
  run.subcommand = app.get_subcommands().front()->get_name();
  try {
    run.cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
    auto& c = run.cfg;
    if (g.out) c.out = *g.out;
    if (g.jobs) c.jobs = *g.jobs;
    if (g.seed) c.seed = *g.seed;
    if (!in.inputs.empty()) c.inputs = in.inputs;
    if (in.format) c.input_format = *in.format == "csv" ? SegmentFormat::kCsv : SegmentFormat::kRecords;
    if (in.fs) c.csv.fs = *in.fs;
    if (in.modality) c.csv.modality = modality_from_string(*in.modality);
    if (in.subject) c.csv.subject_id = *in.subject;
    if (window) c.window_len = *window;
    if (min_distance) c.min_distance = *min_distance;
    if (ts_scale) c.ts_scale = TimeScale::parse(*ts_scale);
    if (distances) c.distances = parse_list<int>(*distances, "distance");
    if (tolerance) c.tolerance = TolerancePolicy::parse(*tolerance);
    if (hrv) c.hrv = *hrv == "rmssd" ? HrvMetric::kRmssd : HrvMetric::kSdnn;
    if (sigmas) c.noise_sigmas = parse_list<double>(*sigmas, "sigma");
    if (k) c.cv_k = *k;
    if (host) c.host = *host;
    if (port) c.port = *port;
    if (static_dir) c.static_dir = *static_dir;
    if (amp_tol) audit.amp_tol = *amp_tol;
    validate(c);
    if (!(audit.amp_tol >= 0.0)) throw Error(ErrorCode::kConfigError, "--amp-tol must be >= 0");
    for (const auto& path : c.inputs)
      if (!fs::exists(path)) throw Error(ErrorCode::kFileNotFound, path);
  } catch (const Error& e) {
    const int code = e.code() == ErrorCode::kFileNotFound ? 3 : 2;
    report_error(std::string(to_string(e.code())), e.what(), code);
    return code;
  }

  try {
    const auto& name = run.subcommand;
    if (name == "synth") {
      cmd_synth(run, synth);
    } else if (name == "preprocess") {
      cmd_preprocess(run);
    } else if (name == "represent") {
      cmd_represent(run);
    } else if (name == "reconstruct") {
      cmd_reconstruct(run, series);
    } else if (name == "sweep-distance") {
      cmd_sweep_distance(run);
    } else if (name == "detect") {
      cmd_detect(run, algo);
    } else if (name == "score") {
      cmd_score(run, pred_path);
    } else if (name == "stats") {
      cmd_stats(run, stats);
    } else if (name == "noise-sweep") {
      cmd_noise_sweep(run, algo);
    } else if (name == "cv-split") {
      cmd_cv_split(run);
    } else if (name == "reward") {
      cmd_reward(run);
    } else if (name == "audit-build") {
      cmd_audit_build(run, audit);
    } else if (name == "audit-check") {
      cmd_audit_check(run, audit);
    } else if (name == "serve") {
      cmd_serve(run, audit);
    }
    write_manifest(run.out_dir(), {run.subcommand, config_to_json(run.cfg), run.inputs, run.outputs});
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    report_error(std::string(to_string(e.code())), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error("Internal", e.what(), 4);
    return 4;
  }
  return 0;
}

}  // namespace peakrep
