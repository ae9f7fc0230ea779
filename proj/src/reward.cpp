#include "peakrep/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "peakrep/evaluation.hpp"

namespace peakrep {
namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool eat_word(std::string_view w) {
    skip_ws();
    if (s_.substr(pos_, w.size()) == w) {
      pos_ += w.size();
      return true;
    }
    return false;
  }
  std::string_view label() {
    skip_ws();
    const auto start = pos_;
    if (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) {
      ++pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    }
    return s_.substr(start, pos_ - start);
  }
  std::string_view until_any(std::string_view stops) {
    skip_ws();
    const auto start = pos_;
    while (pos_ < s_.size() && stops.find(s_[pos_]) == std::string_view::npos) ++pos_;
    return s_.substr(start, pos_ - start);
  }
  std::string_view rest() const { return s_.substr(pos_); }
  bool at_end() {
    skip_ws();
    return pos_ == s_.size();
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::kOk: return "ok";
    case ParseStatus::kMalformed: return "malformed";
    case ParseStatus::kNonMonotonic: return "non_monotonic";
    case ParseStatus::kLabelMismatch: return "label_mismatch";
  }
  return "malformed";
}

ModelOutput parse_model_output(std::string_view text, std::string_view expected_label) {
  ModelOutput out;
  out.raw = std::string(text);
  auto malformed = [&] {
    out.status = ParseStatus::kMalformed;
    out.peak_label.clear();
    out.timestamps.clear();
    out.explanation.clear();
    return out;
  };

  std::string_view body = trim(text);
  if (!body.empty() && body.front() == '{') {
    if (body.back() != '}') return malformed();
    body = body.substr(1, body.size() - 2);
  }

  Cursor c(body);
  const auto label = c.label();
  if (label.empty() || !c.eat(':') || !c.eat('[')) return malformed();
  out.peak_label = std::string(label);

  std::vector<std::int64_t> seconds;
  if (!c.eat(']')) {
    while (true) {
      const auto ts = trim(c.until_any(",]"));
      try {
        seconds.push_back(timestamp_to_seconds(ts));
      } catch (const Error&) {
        return malformed();
      }
      out.timestamps.emplace_back(ts);
      if (c.eat(']')) break;
      if (!c.eat(',')) return malformed();
    }
  }

  if (c.eat_word("Explanation")) {
    if (!c.eat(':')) return malformed();
    out.explanation = std::string(trim(c.rest()));
  } else if (!c.at_end()) {
    return malformed();
  }

  for (std::size_t i = 1; i < seconds.size(); ++i) {
    if (seconds[i] <= seconds[i - 1]) {
      out.status = ParseStatus::kNonMonotonic;
      return out;
    }
  }
  out.status = (!expected_label.empty() && expected_label != out.peak_label) ? ParseStatus::kLabelMismatch
                                                                             : ParseStatus::kOk;
  return out;
}

std::string format_model_output(const ModelOutput& out) {
  std::string s = "{" + out.peak_label + ": [";
  for (std::size_t i = 0; i < out.timestamps.size(); ++i) {
    if (i) s += ", ";
    s += out.timestamps[i];
  }
  s += "]";
  if (!out.explanation.empty()) s += " Explanation: " + out.explanation;
  return s + "}";
}

std::string default_peak_label(Modality m) {
  switch (m) {
    case Modality::kECG: return "R";
    case Modality::kPPG: return "SP";
    case Modality::kBCG:
    case Modality::kBSG: return "J";
    case Modality::kSynth: return "P";
  }
  return "P";
}

void validate(const RewardWeights& w) {
  for (const double v : {w.alpha, w.beta, w.gamma, w.delta})
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::kInvalidSpec, "reward weights must be non-negative");
}

double format_reward(const ModelOutput& out) { return out.ok() ? 1.0 : 0.0; }

double detection_reward(std::span<const Index> pred, std::span<const Index> gt, double fs, double tol_ms) {
  return prf(match_peaks(pred, gt, fs, TolerancePolicy::fixed_ms(tol_ms))).f1;
}

double complete_reward(std::size_t n_pred, std::size_t n_gt) {
  const auto diff = n_pred > n_gt ? n_pred - n_gt : n_gt - n_pred;
  return std::exp(-static_cast<double>(diff));
}

double hr_consistency_reward(std::span<const Index> pred, std::span<const Index> gt, double fs) {
  if (gt.size() < 2) throw Error(ErrorCode::kGroundTruthDegenerate, "ground truth needs at least two peaks");
  const double hr_gt = heart_rate(intervals(gt, fs));
  double rel = 1.0;
  if (pred.size() >= 2) rel = std::min(1.0, std::abs(heart_rate(intervals(pred, fs)) - hr_gt) / hr_gt);
  return std::exp(-2.0 * rel);
}

RewardBreakdown total_reward(double r_format, double r_detection, double r_complete, double r_hr,
                             const RewardWeights& weights) {
  validate(weights);
  RewardBreakdown b{r_format, r_detection, r_complete, r_hr, 0.0, weights};
  b.total = weights.alpha * r_format + weights.beta * r_detection + weights.gamma * r_complete + weights.delta * r_hr;
  return b;
}

IndexList timestamps_to_indices(std::span<const std::string> timestamps, TimeScale scale) {
  IndexList out;
  for (const auto& ts : timestamps) {
    const Index i = timestamp_to_index(ts, scale);
    if (out.empty() || i > out.back()) out.push_back(i);
  }
  return out;
}

ScoredOutput score_model_output(std::string_view raw, std::span<const Index> gt, double fs, TimeScale scale,
                                std::string_view expected_label, const RewardWeights& weights, double tol_ms) {
  ScoredOutput s{parse_model_output(raw, expected_label), {}, {}};
  const double r_format = format_reward(s.output);
  if (!s.output.has_peak_list()) {
    s.reward = total_reward(r_format, 0.0, 0.0, 0.0, weights);
    return s;
  }
  s.pred = timestamps_to_indices(s.output.timestamps, scale);
  s.reward = total_reward(r_format, detection_reward(s.pred, gt, fs, tol_ms), complete_reward(s.pred.size(), gt.size()),
                          hr_consistency_reward(s.pred, gt, fs), weights);
  return s;
}

}  // namespace peakrep
