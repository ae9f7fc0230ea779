#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peakrep/representation.hpp"
#include "peakrep/signal.hpp"

namespace peakrep {

enum class ParseStatus { kOk, kMalformed, kNonMonotonic, kLabelMismatch };

std::string_view to_string(ParseStatus s);

/// A model answer of the form `{LABEL: [ts, ...] Explanation: text}`. Braces
/// and the explanation are optional; whitespace between tokens is free.
struct ModelOutput {
  ParseStatus status = ParseStatus::kMalformed;
  std::string peak_label;
  std::vector<std::string> timestamps;
  std::string explanation;  // trimmed
  std::string raw;

  bool ok() const { return status == ParseStatus::kOk; }
  /// Label mismatches still carry a usable, ordered peak list.
  bool has_peak_list() const { return status == ParseStatus::kOk || status == ParseStatus::kLabelMismatch; }
};

/// Never throws; failures are reported through `status`. An empty
/// expected_label accepts any label.
ModelOutput parse_model_output(std::string_view text, std::string_view expected_label = {});

/// Canonical text: `{LABEL: [ts, ts] Explanation: text}`, the explanation
/// part omitted when empty.
std::string format_model_output(const ModelOutput& out);

/// Answer label for the fiducial of each modality (R, SP, J, J, P).
std::string default_peak_label(Modality m);

struct RewardWeights {
  double alpha = 0.1;
  double beta = 0.6;
  double gamma = 0.15;
  double delta = 0.15;
};

void validate(const RewardWeights& w);

struct RewardBreakdown {
  double r_format = 0.0;
  double r_detection = 0.0;
  double r_complete = 0.0;
  double r_hr = 0.0;
  double total = 0.0;
  RewardWeights weights;
};

double format_reward(const ModelOutput& out);
double detection_reward(std::span<const Index> pred, std::span<const Index> gt, double fs, double tol_ms = 30.0);
double complete_reward(std::size_t n_pred, std::size_t n_gt);
/// exp(-2 * min(|HR_pred - HR_gt| / HR_gt, 1)); fewer than two predicted
/// peaks counts as the capped error.
double hr_consistency_reward(std::span<const Index> pred, std::span<const Index> gt, double fs);
RewardBreakdown total_reward(double r_format, double r_detection, double r_complete, double r_hr,
                             const RewardWeights& weights = {});

/// Converts answer timestamps to indices with an explicit scale; repeated
/// indices (possible when one sample spans several seconds) collapse.
IndexList timestamps_to_indices(std::span<const std::string> timestamps, TimeScale scale);

struct ScoredOutput {
  ModelOutput output;
  IndexList pred;
  RewardBreakdown reward;
};

/// Parses and scores one answer. Without a usable peak list every component
/// other than r_format is 0.
ScoredOutput score_model_output(std::string_view raw, std::span<const Index> gt, double fs, TimeScale scale,
                                std::string_view expected_label = {}, const RewardWeights& weights = {},
                                double tol_ms = 30.0);

}  // namespace peakrep
