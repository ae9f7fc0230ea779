#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peakrep/representation.hpp"
#include "peakrep/reward.hpp"
#include "peakrep/signal.hpp"

namespace peakrep {

enum class HumanLabel { kConcise, kAmbiguous, kIncorrect };

std::string_view to_string(HumanLabel l);
/// Case-insensitive; throws kInvalidLabel.
HumanLabel human_label_from_string(std::string_view text);

struct CheckOutcome {
  bool pass = true;
  std::vector<std::string> offenders;
};

struct RuleCheckReport {
  CheckOutcome peak_list_matches_gt;
  CheckOutcome all_timestamps_in_candidates;
  CheckOutcome amplitudes_consistent;
  CheckOutcome intervals_consistent;
  CheckOutcome template_ok;

  bool overall() const;
  /// Names of the failing checks, in check order.
  std::vector<std::string> failed() const;
};

inline const std::vector<std::string>& rule_check_names() {
  static const std::vector<std::string> names = {"peak_list_matches_gt", "all_timestamps_in_candidates",
                                                 "amplitudes_consistent", "intervals_consistent", "template_ok"};
  return names;
}

struct AuditOptions {
  double amp_tol = 0.005;
  std::optional<double> ibi_tol_s;  // default: one sample of the representation's time scale
};

/// Rule-based review of one answer.
///
/// Timestamps in the explanation may be written in full or as bare
/// HH:MM:SS. An amplitude claim is a timestamp followed by `:`, `,`, `(` or
/// `Amplitude:` and a decimal number; an interval claim is
/// `ts -> ts: N seconds` (also `→` or `\rightarrow`, and `s` for seconds).
/// Claims about timestamps that are not candidates are reported by the
/// candidate check only.
RuleCheckReport factual_consistency_check(const ModelOutput& output, const PeakRepresentation& rep,
                                          const SignalSegment& seg, const AuditOptions& opts = {});

/// An answer built directly from the representation and the ground truth:
/// the peak list, the amplitude of each peak, the intervals between them and
/// a few rejected candidates.
std::string faithful_output(const PeakRepresentation& rep, std::span<const Index> gt, std::string_view label);

struct AuditRecord {
  std::string record_id;
  std::string segment_ref;
  std::string serialized_rep;
  std::string expected_label;
  ModelOutput model_output;
  RuleCheckReport rule_report;
  bool duplicate = false;
  std::optional<HumanLabel> human_label;
  std::optional<std::string> reviewer_id;
  std::optional<std::string> labeled_at;
};

struct AuditSummary {
  std::size_t records = 0;
  std::size_t rejected = 0;
  std::size_t duplicates = 0;
  std::map<std::string, std::size_t> labels;        // CONCISE/AMBIGUOUS/INCORRECT/UNLABELED
  std::map<std::string, std::size_t> check_failures;  // per rule check name

  bool operator==(const AuditSummary&) const = default;
};

struct AuditBundle {
  static constexpr int kVersion = 1;
  std::string bundle_id;
  std::vector<AuditRecord> records;
  std::vector<SignalSegment> segments;
  std::vector<PeakRepresentation> reps;
  AuditSummary summary;

  const AuditRecord* find(std::string_view record_id) const;
};

AuditSummary summarize(const AuditBundle& bundle);

/// 16 hex digits of FNV-1a over segment_ref, a separator and the raw output.
std::string audit_record_id(std::string_view segment_ref, std::string_view raw_output);

/// One record per (segment, rep, output) triple. Expected labels follow each
/// segment's modality unless `expected_labels` is non-empty.
AuditBundle build_audit_bundle(std::span<const SignalSegment> segments, std::span<const PeakRepresentation> reps,
                               std::span<const std::string> outputs, std::span<const std::string> expected_labels = {},
                               const AuditOptions& opts = {});

struct LabelEntry {
  std::string ts;
  std::string record_id;
  std::string reviewer_id;
  HumanLabel label;
};

std::string to_json_line(const LabelEntry& e);
LabelEntry parse_label_line(std::string_view line, std::size_t line_no = 1);

/// Applies a label to the materialized view (last write wins). Returns the
/// log entry to append, or nothing when the record already carries the same
/// label from the same reviewer, so a retried submission is not logged twice.
std::optional<LabelEntry> record_label(AuditBundle& bundle, std::string_view record_id, HumanLabel label,
                                       std::string_view reviewer_id, std::string ts);

/// Append-only label log; one writer at a time.
class LabelLog {
 public:
  explicit LabelLog(std::filesystem::path path) : path_(std::move(path)) {}

  void append(const LabelEntry& e) const;
  std::vector<LabelEntry> read() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Replays a log over a bundle; the result equals applying every label live.
void replay(AuditBundle& bundle, std::span<const LabelEntry> log);

std::string bundle_to_json(const AuditBundle& bundle);
AuditBundle bundle_from_json(std::string_view text);
/// Plot payload for one segment: samples, ground truth, candidates and the
/// ids of records that refer to it. Throws kUnknownRecord.
std::string segment_payload_json(const AuditBundle& bundle, std::string_view segment_id);

std::string utc_now_iso8601();

}  // namespace peakrep
