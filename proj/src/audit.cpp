#include "peakrep/audit.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace peakrep {
namespace {

using nlohmann::ordered_json;

constexpr std::int64_t kSecondsPerDay = 86400;

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool digits_at(std::string_view s, std::size_t pos, std::size_t count) {
  if (pos + count > s.size()) return false;
  for (std::size_t i = 0; i < count; ++i)
    if (!is_digit(s[pos + i])) return false;
  return true;
}

/// True when a citation ending at `end` is really the prefix of a longer
/// clock value such as `HH:MM:SS:ff` or `HH:MM:SS5`.
bool continues_clock(std::string_view s, std::size_t end) {
  if (end >= s.size()) return false;
  if (is_digit(s[end])) return true;
  return s[end] == ':' && end + 1 < s.size() && is_digit(s[end + 1]);
}

bool hms_at(std::string_view s, std::size_t pos) {
  return digits_at(s, pos, 2) && pos + 8 <= s.size() && s[pos + 2] == ':' && digits_at(s, pos + 3, 2) &&
         s[pos + 5] == ':' && digits_at(s, pos + 6, 2);
}

struct Citation {
  std::size_t begin;
  std::size_t end;
  std::int64_t seconds;
  std::string text;
};

/// Full `YYYY-MM-DD HH:MM:SS` or bare `HH:MM:SS` (taken on the anchor day).
std::vector<Citation> find_timestamps(std::string_view s) {
  std::vector<Citation> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const bool boundary = i == 0 || (!is_digit(s[i - 1]) && s[i - 1] != ':' && s[i - 1] != '-');
    if (boundary && digits_at(s, i, 4) && i + 19 <= s.size() && s[i + 4] == '-' && digits_at(s, i + 5, 2) &&
        s[i + 7] == '-' && digits_at(s, i + 8, 2) && s[i + 10] == ' ' && hms_at(s, i + 11) &&
        !continues_clock(s, i + 19)) {
      const auto text = s.substr(i, 19);
      try {
        out.push_back({i, i + 19, timestamp_to_seconds(text), std::string(text)});
      } catch (const Error&) {
        out.push_back({i, i + 19, -1, std::string(text)});
      }
      i += 19;
      continue;
    }
    if (boundary && hms_at(s, i) && !continues_clock(s, i + 8)) {
      const auto text = s.substr(i, 8);
      const int h = (text[0] - '0') * 10 + (text[1] - '0');
      const int m = (text[3] - '0') * 10 + (text[4] - '0');
      const int sec = (text[6] - '0') * 10 + (text[7] - '0');
      const bool valid = h < 24 && m < 60 && sec < 60;
      out.push_back({i, i + 8, valid ? h * 3600 + m * 60 + sec : -1, std::string(text)});
      i += 8;
      continue;
    }
    ++i;
  }
  return out;
}

/// Skips whitespace and light markup (`*`, `$`, `\textbf{`, `{`).
std::size_t skip_markup(std::string_view s, std::size_t pos) {
  while (pos < s.size()) {
    if (std::isspace(static_cast<unsigned char>(s[pos])) || s[pos] == '*' || s[pos] == '$' || s[pos] == '{') {
      ++pos;
    } else if (s.substr(pos, 8) == "\\textbf{") {
      pos += 8;
    } else {
      break;
    }
  }
  return pos;
}

std::size_t skip_arrow(std::string_view s, std::size_t pos) {
  for (const std::string_view arrow : {std::string_view("->"), std::string_view("\xE2\x86\x92"),
                                       std::string_view("\\rightarrow")}) {
    if (s.substr(pos, arrow.size()) == arrow) return pos + arrow.size();
  }
  return std::string_view::npos;
}

struct Number {
  double value;
  bool has_point;
  std::size_t end;
};

std::optional<Number> number_at(std::string_view s, std::size_t pos) {
  const auto start = pos;
  if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) ++pos;
  const auto int_start = pos;
  while (pos < s.size() && is_digit(s[pos])) ++pos;
  if (pos == int_start) return std::nullopt;
  bool point = false;
  if (pos + 1 < s.size() && s[pos] == '.' && is_digit(s[pos + 1])) {
    point = true;
    ++pos;
    while (pos < s.size() && is_digit(s[pos])) ++pos;
  }
  return Number{std::stod(std::string(s.substr(start, pos - start))), point, pos};
}

bool seconds_unit_at(std::string_view s, std::size_t pos) {
  while (pos < s.size() && s[pos] == ' ') ++pos;
  for (const std::string_view unit : {std::string_view("seconds"), std::string_view("second"),
                                      std::string_view("sec"), std::string_view("s")}) {
    if (s.substr(pos, unit.size()) != unit) continue;
    const auto after = pos + unit.size();
    if (after == s.size() || !std::isalpha(static_cast<unsigned char>(s[after]))) return true;
  }
  return false;
}

std::int64_t elapsed_of(Index index, TimeScale scale) { return timestamp_to_seconds(index_to_timestamp(index, scale)); }

std::string cite(std::int64_t seconds, bool bare) {
  const auto full = seconds_to_timestamp(seconds);
  return bare && seconds < kSecondsPerDay ? full.substr(11) : full;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return out;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (const unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string_view to_string(HumanLabel l) {
  switch (l) {
    case HumanLabel::kConcise: return "CONCISE";
    case HumanLabel::kAmbiguous: return "AMBIGUOUS";
    case HumanLabel::kIncorrect: return "INCORRECT";
  }
  return "CONCISE";
}

HumanLabel human_label_from_string(std::string_view text) {
  std::string upper(text);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto l : {HumanLabel::kConcise, HumanLabel::kAmbiguous, HumanLabel::kIncorrect})
    if (to_string(l) == upper) return l;
  throw Error(ErrorCode::kInvalidLabel, "'" + std::string(text) + "'");
}

bool RuleCheckReport::overall() const {
  return peak_list_matches_gt.pass && all_timestamps_in_candidates.pass && amplitudes_consistent.pass &&
         intervals_consistent.pass && template_ok.pass;
}

std::vector<std::string> RuleCheckReport::failed() const {
  std::vector<std::string> out;
  const CheckOutcome* checks[] = {&peak_list_matches_gt, &all_timestamps_in_candidates, &amplitudes_consistent,
                                  &intervals_consistent, &template_ok};
  for (std::size_t i = 0; i < 5; ++i)
    if (!checks[i]->pass) out.push_back(rule_check_names()[i]);
  return out;
}

RuleCheckReport factual_consistency_check(const ModelOutput& output, const PeakRepresentation& rep,
                                          const SignalSegment& seg, const AuditOptions& opts) {
  if (rep.segment_ref != seg.segment_id)
    throw Error(ErrorCode::kSegmentMismatch, "representation of '" + rep.segment_ref + "' vs segment '" +
                                                 seg.segment_id + "'");
  RuleCheckReport report;
  auto fail = [](CheckOutcome& c, std::string what) {
    c.pass = false;
    c.offenders.push_back(std::move(what));
  };

  // (i) answer list equals the ground truth
  if (!output.has_peak_list()) {
    fail(report.peak_list_matches_gt, "no peak list");
  } else {
    std::vector<std::int64_t> said;
    for (const auto& ts : output.timestamps) said.push_back(timestamp_to_seconds(ts));
    std::vector<std::int64_t> truth;
    for (const Index g : seg.gt_peaks) truth.push_back(elapsed_of(g, rep.scale));
    const std::set<std::int64_t> said_set(said.begin(), said.end()), truth_set(truth.begin(), truth.end());
    for (const auto s : said)
      if (!truth_set.count(s)) fail(report.peak_list_matches_gt, "extra " + seconds_to_timestamp(s));
    for (const auto t : truth)
      if (!said_set.count(t)) fail(report.peak_list_matches_gt, "missing " + seconds_to_timestamp(t));
    if (report.peak_list_matches_gt.pass && said.size() != truth.size())
      fail(report.peak_list_matches_gt, "count " + std::to_string(said.size()) + " vs " + std::to_string(truth.size()));
  }

  std::multimap<std::int64_t, double> amplitude_at;
  for (const auto& e : rep.entries) amplitude_at.emplace(elapsed_of(e.index, rep.scale), e.amplitude);
  auto known = [&](std::int64_t s) { return s >= 0 && amplitude_at.count(s) > 0; };

  const std::string_view text = output.explanation;
  const auto cites = find_timestamps(text);

  // (ii) every cited timestamp is a candidate
  for (const auto& c : cites)
    if (!known(c.seconds)) fail(report.all_timestamps_in_candidates, c.text);

  // (iv) interval claims; their right-hand timestamps are not amplitude claims
  const double ibi_tol = opts.ibi_tol_s.value_or(rep.scale.seconds());
  std::set<std::size_t> interval_rhs;
  for (std::size_t k = 0; k + 1 < cites.size(); ++k) {
    const auto arrow = skip_arrow(text, skip_markup(text, cites[k].end));
    if (arrow == std::string_view::npos || skip_markup(text, arrow) != cites[k + 1].begin) continue;
    auto pos = skip_markup(text, cites[k + 1].end);
    if (pos >= text.size() || text[pos] != ':') continue;
    interval_rhs.insert(k + 1);
    pos = skip_markup(text, pos + 1);
    const auto num = number_at(text, pos);
    if (!num || !seconds_unit_at(text, num->end)) continue;
    if (!known(cites[k].seconds) || !known(cites[k + 1].seconds)) continue;
    const double actual = static_cast<double>(cites[k + 1].seconds - cites[k].seconds);
    if (std::abs(num->value - actual) > ibi_tol * (1.0 + 1e-12))
      fail(report.intervals_consistent, cites[k].text + " -> " + cites[k + 1].text + ": " +
                                            std::string(text.substr(pos, num->end - pos)));
  }

  // (iii) amplitude claims
  for (std::size_t k = 0; k < cites.size(); ++k) {
    if (interval_rhs.count(k) || !known(cites[k].seconds)) continue;
    auto pos = skip_markup(text, cites[k].end);
    if (pos >= text.size() || (text[pos] != ':' && text[pos] != ',' && text[pos] != '(')) continue;
    pos = skip_markup(text, pos + 1);
    if (text.substr(pos, 10) == "Amplitude:") pos = skip_markup(text, pos + 10);
    const auto num = number_at(text, pos);
    if (!num || !num->has_point) continue;
    const auto [lo, hi] = amplitude_at.equal_range(cites[k].seconds);
    bool match = false;
    for (auto it = lo; it != hi && !match; ++it) match = std::abs(it->second - num->value) <= opts.amp_tol;
    if (!match) fail(report.amplitudes_consistent, cites[k].text + " " + std::string(text.substr(pos, num->end - pos)));
  }

  // (v) template
  if (!output.ok()) fail(report.template_ok, std::string(to_string(output.status)));
  return report;
}

std::string faithful_output(const PeakRepresentation& rep, std::span<const Index> gt, std::string_view label) {
  std::map<Index, const CandidatePeak*> by_index;
  for (const auto& e : rep.entries) by_index[e.index] = &e;
  const std::set<Index> gt_set(gt.begin(), gt.end());

  std::ostringstream os;
  os << '{' << label << ": [";
  for (std::size_t i = 0; i < gt.size(); ++i) os << (i ? ", " : "") << index_to_timestamp(gt[i], rep.scale);
  os << "] Explanation: Selected peaks:";
  for (const Index g : gt) {
    const auto it = by_index.find(g);
    if (it == by_index.end()) continue;
    os << "\n- " << it->second->timestamp << ": " << format_amplitude(it->second->amplitude);
  }
  if (gt.size() >= 2) {
    os << "\nInter-beat intervals:";
    for (std::size_t i = 1; i < gt.size(); ++i) {
      if (!by_index.count(gt[i - 1]) || !by_index.count(gt[i])) continue;
      const auto a = elapsed_of(gt[i - 1], rep.scale), b = elapsed_of(gt[i], rep.scale);
      os << "\n- " << cite(a, true) << " -> " << cite(b, true) << ": " << (b - a) << " seconds";
    }
  }
  std::vector<const CandidatePeak*> rejected;
  for (const auto& e : rep.entries)
    if (e.polarity == Polarity::kMax && !gt_set.count(e.index)) rejected.push_back(&e);
  std::stable_sort(rejected.begin(), rejected.end(),
                   [](const CandidatePeak* a, const CandidatePeak* b) { return a->amplitude > b->amplitude; });
  if (rejected.size() > 3) rejected.resize(3);
  if (!rejected.empty()) {
    os << "\nRejected candidates:";
    for (const auto* e : rejected) os << "\n- " << cite(elapsed_of(e->index, rep.scale), true) << " (" << format_amplitude(e->amplitude) << ")";
  }
  os << '}';
  return os.str();
}

const AuditRecord* AuditBundle::find(std::string_view record_id) const {
  for (const auto& r : records)
    if (r.record_id == record_id) return &r;
  return nullptr;
}

AuditSummary summarize(const AuditBundle& bundle) {
  AuditSummary s;
  for (const auto l : {HumanLabel::kConcise, HumanLabel::kAmbiguous, HumanLabel::kIncorrect})
    s.labels[std::string(to_string(l))] = 0;
  s.labels["UNLABELED"] = 0;
  for (const auto& name : rule_check_names()) s.check_failures[name] = 0;
  for (const auto& r : bundle.records) {
    ++s.records;
    if (!r.rule_report.overall()) ++s.rejected;
    if (r.duplicate) ++s.duplicates;
    ++s.labels[r.human_label ? std::string(to_string(*r.human_label)) : "UNLABELED"];
    for (const auto& name : r.rule_report.failed()) ++s.check_failures[name];
  }
  return s;
}

std::string audit_record_id(std::string_view segment_ref, std::string_view raw_output) {
  auto h = fnv1a(segment_ref);
  h = fnv1a(std::string_view("\x1f", 1), h);
  return hex64(fnv1a(raw_output, h));
}

AuditBundle build_audit_bundle(std::span<const SignalSegment> segments, std::span<const PeakRepresentation> reps,
                               std::span<const std::string> outputs, std::span<const std::string> expected_labels,
                               const AuditOptions& opts) {
  if (segments.size() != reps.size() || segments.size() != outputs.size() ||
      (!expected_labels.empty() && expected_labels.size() != segments.size()))
    throw Error(ErrorCode::kAlignmentError, "segments, representations and outputs must have equal length");

  AuditBundle bundle;
  std::set<std::string> seen_ids;
  std::set<std::string> seen_segments;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto expected = expected_labels.empty() ? default_peak_label(segments[i].modality) : expected_labels[i];
    AuditRecord r;
    r.segment_ref = segments[i].segment_id;
    r.record_id = audit_record_id(r.segment_ref, outputs[i]);
    r.serialized_rep = serialize(reps[i]);
    r.expected_label = expected;
    r.model_output = parse_model_output(outputs[i], expected);
    r.rule_report = factual_consistency_check(r.model_output, reps[i], segments[i], opts);
    r.duplicate = !seen_ids.insert(r.record_id).second;
    h = fnv1a(r.record_id, h);
    bundle.records.push_back(std::move(r));
    if (seen_segments.insert(segments[i].segment_id).second) {
      bundle.segments.push_back(segments[i]);
      bundle.reps.push_back(reps[i]);
    }
  }
  bundle.bundle_id = hex64(h);
  bundle.summary = summarize(bundle);
  return bundle;
}

std::string to_json_line(const LabelEntry& e) {
  ordered_json j;
  j["ts"] = e.ts;
  j["record_id"] = e.record_id;
  j["reviewer_id"] = e.reviewer_id;
  j["label"] = std::string(to_string(e.label));
  return j.dump();
}

LabelEntry parse_label_line(std::string_view line, std::size_t line_no) {
  try {
    const auto j = ordered_json::parse(line);
    return {j.at("ts").get<std::string>(), j.at("record_id").get<std::string>(),
            j.at("reviewer_id").get<std::string>(), human_label_from_string(j.at("label").get<std::string>())};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(line_no, e.what());
  }
}

std::optional<LabelEntry> record_label(AuditBundle& bundle, std::string_view record_id, HumanLabel label,
                                       std::string_view reviewer_id, std::string ts) {
  if (reviewer_id.empty()) throw Error(ErrorCode::kInvalidLabel, "reviewer_id is required");
  auto it = std::find_if(bundle.records.begin(), bundle.records.end(),
                         [&](const AuditRecord& r) { return r.record_id == record_id; });
  if (it == bundle.records.end()) throw Error(ErrorCode::kUnknownRecord, std::string(record_id));
  if (it->human_label == label && it->reviewer_id == reviewer_id) return std::nullopt;
  it->human_label = label;
  it->reviewer_id = std::string(reviewer_id);
  it->labeled_at = ts;
  bundle.summary = summarize(bundle);
  return LabelEntry{std::move(ts), std::string(record_id), std::string(reviewer_id), label};
}

void LabelLog::append(const LabelEntry& e) const {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(ErrorCode::kFileNotFound, path_.string());
  out << to_json_line(e) << '\n';
  out.flush();
}

std::vector<LabelEntry> LabelLog::read() const {
  std::vector<LabelEntry> entries;
  std::ifstream in(path_);
  if (!in) return entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    entries.push_back(parse_label_line(line, line_no));
  }
  return entries;
}

void replay(AuditBundle& bundle, std::span<const LabelEntry> log) {
  for (const auto& e : log) {
    auto it = std::find_if(bundle.records.begin(), bundle.records.end(),
                           [&](const AuditRecord& r) { return r.record_id == e.record_id; });
    if (it == bundle.records.end()) throw Error(ErrorCode::kUnknownRecord, e.record_id);
    it->human_label = e.label;
    it->reviewer_id = e.reviewer_id;
    it->labeled_at = e.ts;
  }
  bundle.summary = summarize(bundle);
}

namespace {

ordered_json check_json(const CheckOutcome& c) { return {{"pass", c.pass}, {"offenders", c.offenders}}; }

CheckOutcome check_from(const ordered_json& j) {
  return {j.at("pass").get<bool>(), j.at("offenders").get<std::vector<std::string>>()};
}

ordered_json summary_json(const AuditSummary& s) {
  ordered_json j;
  j["records"] = s.records;
  j["rejected"] = s.rejected;
  j["duplicates"] = s.duplicates;
  j["labels"] = s.labels;
  j["check_failures"] = s.check_failures;
  return j;
}

ordered_json rep_json(const PeakRepresentation& rep) {
  ordered_json entries = ordered_json::array();
  for (const auto& e : rep.entries)
    entries.push_back({{"index", e.index},
                       {"timestamp", e.timestamp},
                       {"amplitude", e.amplitude},
                       {"polarity", std::string(to_string(e.polarity))}});
  return {{"segment_ref", rep.segment_ref},
          {"fs", rep.fs},
          {"ts_scale", rep.scale.to_string()},
          {"min_distance", rep.min_distance},
          {"entries", entries}};
}

Polarity polarity_from(const std::string& s) {
  if (s == to_string(Polarity::kMax)) return Polarity::kMax;
  if (s == to_string(Polarity::kMin)) return Polarity::kMin;
  return Polarity::kNone;
}

}  // namespace

std::string bundle_to_json(const AuditBundle& bundle) {
  ordered_json j;
  j["version"] = AuditBundle::kVersion;
  j["bundle_id"] = bundle.bundle_id;
  j["summary"] = summary_json(bundle.summary);
  auto& records = j["records"] = ordered_json::array();
  for (const auto& r : bundle.records) {
    ordered_json checks;
    checks["peak_list_matches_gt"] = check_json(r.rule_report.peak_list_matches_gt);
    checks["all_timestamps_in_candidates"] = check_json(r.rule_report.all_timestamps_in_candidates);
    checks["amplitudes_consistent"] = check_json(r.rule_report.amplitudes_consistent);
    checks["intervals_consistent"] = check_json(r.rule_report.intervals_consistent);
    checks["template_ok"] = check_json(r.rule_report.template_ok);
    ordered_json rec;
    rec["record_id"] = r.record_id;
    rec["segment_ref"] = r.segment_ref;
    rec["serialized_rep"] = r.serialized_rep;
    rec["expected_label"] = r.expected_label;
    rec["model_output"] = {{"status", std::string(to_string(r.model_output.status))},
                           {"peak_label", r.model_output.peak_label},
                           {"timestamps", r.model_output.timestamps},
                           {"explanation", r.model_output.explanation},
                           {"raw", r.model_output.raw}};
    rec["rule_report"] = checks;
    rec["overall"] = r.rule_report.overall();
    rec["duplicate"] = r.duplicate;
    rec["human_label"] = r.human_label ? ordered_json(std::string(to_string(*r.human_label))) : ordered_json(nullptr);
    rec["reviewer_id"] = r.reviewer_id ? ordered_json(*r.reviewer_id) : ordered_json(nullptr);
    rec["labeled_at"] = r.labeled_at ? ordered_json(*r.labeled_at) : ordered_json(nullptr);
    records.push_back(std::move(rec));
  }
  auto& segs = j["segments"] = ordered_json::array();
  for (const auto& s : bundle.segments) segs.push_back(ordered_json::parse(to_record(s)));
  auto& reps = j["reps"] = ordered_json::array();
  for (const auto& r : bundle.reps) reps.push_back(rep_json(r));
  return j.dump(2);
}

AuditBundle bundle_from_json(std::string_view text) {
  AuditBundle b;
  try {
    const auto j = ordered_json::parse(text);
    if (j.at("version").get<int>() != AuditBundle::kVersion)
      throw Error(ErrorCode::kFormatError, "unsupported bundle version");
    b.bundle_id = j.at("bundle_id").get<std::string>();
    for (const auto& rec : j.at("records")) {
      AuditRecord r;
      r.record_id = rec.at("record_id").get<std::string>();
      r.segment_ref = rec.at("segment_ref").get<std::string>();
      r.serialized_rep = rec.at("serialized_rep").get<std::string>();
      r.expected_label = rec.at("expected_label").get<std::string>();
      const auto& mo = rec.at("model_output");
      r.model_output = parse_model_output(mo.at("raw").get<std::string>(), r.expected_label);
      if (to_string(r.model_output.status) != mo.at("status").get<std::string>())
        throw Error(ErrorCode::kInvariantViolation, "record " + r.record_id + ": stored parse status disagrees");
      const auto& checks = rec.at("rule_report");
      r.rule_report.peak_list_matches_gt = check_from(checks.at("peak_list_matches_gt"));
      r.rule_report.all_timestamps_in_candidates = check_from(checks.at("all_timestamps_in_candidates"));
      r.rule_report.amplitudes_consistent = check_from(checks.at("amplitudes_consistent"));
      r.rule_report.intervals_consistent = check_from(checks.at("intervals_consistent"));
      r.rule_report.template_ok = check_from(checks.at("template_ok"));
      r.duplicate = rec.at("duplicate").get<bool>();
      if (!rec.at("human_label").is_null()) r.human_label = human_label_from_string(rec.at("human_label").get<std::string>());
      if (!rec.at("reviewer_id").is_null()) r.reviewer_id = rec.at("reviewer_id").get<std::string>();
      if (!rec.at("labeled_at").is_null()) r.labeled_at = rec.at("labeled_at").get<std::string>();
      b.records.push_back(std::move(r));
    }
    std::size_t line = 0;
    for (const auto& s : j.at("segments")) b.segments.push_back(parse_record(s.dump(), ++line));
    for (const auto& rj : j.at("reps")) {
      PeakRepresentation rep;
      rep.segment_ref = rj.at("segment_ref").get<std::string>();
      rep.fs = rj.at("fs").get<double>();
      rep.scale = TimeScale::parse(rj.at("ts_scale").get<std::string>());
      rep.min_distance = rj.at("min_distance").get<int>();
      for (const auto& e : rj.at("entries"))
        rep.entries.push_back({e.at("index").get<Index>(), e.at("amplitude").get<double>(),
                               polarity_from(e.at("polarity").get<std::string>()), e.at("timestamp").get<std::string>()});
      b.reps.push_back(std::move(rep));
    }
    b.summary = summarize(b);
    const auto stored = j.at("summary");
    if (stored.at("records").get<std::size_t>() != b.summary.records ||
        stored.at("rejected").get<std::size_t>() != b.summary.rejected ||
        stored.at("labels").get<std::map<std::string, std::size_t>>() != b.summary.labels)
      throw Error(ErrorCode::kInvariantViolation, "bundle summary disagrees with its records");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, std::string("bundle: ") + e.what());
  }
  return b;
}

std::string segment_payload_json(const AuditBundle& bundle, std::string_view segment_id) {
  for (std::size_t i = 0; i < bundle.segments.size(); ++i) {
    if (bundle.segments[i].segment_id != segment_id) continue;
    ordered_json j = ordered_json::parse(to_record(bundle.segments[i]));
    j["rep"] = rep_json(bundle.reps[i]);
    auto& ids = j["record_ids"] = ordered_json::array();
    for (const auto& r : bundle.records)
      if (r.segment_ref == segment_id) ids.push_back(r.record_id);
    return j.dump();
  }
  throw Error(ErrorCode::kUnknownRecord, "segment '" + std::string(segment_id) + "'");
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace peakrep
