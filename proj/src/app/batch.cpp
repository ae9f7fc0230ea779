#include "peakrep/app.hpp"

namespace peakrep {

nlohmann::ordered_json score_reward_record(const nlohmann::ordered_json& record, const RewardWeights& weights,
                                           double tol_ms, TimeScale default_scale) {
  std::string raw;
  double fs = 0.0;
  IndexList gt;
  std::string expected;
  TimeScale scale = default_scale;
  try {
    raw = record.at("raw_output").get<std::string>();
    fs = record.at("fs").get<double>();
    gt = record.at("gt_peaks").get<IndexList>();
    if (record.contains("expected_label")) expected = record.at("expected_label").get<std::string>();
    if (record.contains("ts_scale")) scale = TimeScale::parse(record.at("ts_scale").get<std::string>());
    record.at("segment_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, std::string("reward record: ") + e.what());
  }
  if (!(fs > 0.0)) throw Error(ErrorCode::kFormatError, "reward record: fs must be positive");

  const auto scored = score_model_output(raw, gt, fs, scale, expected, weights, tol_ms);
  auto out = record;
  out["parse_status"] = std::string(to_string(scored.output.status));
  out["pred_peaks"] = scored.pred;
  out["r_format"] = scored.reward.r_format;
  out["r_detection"] = scored.reward.r_detection;
  out["r_complete"] = scored.reward.r_complete;
  out["r_hr"] = scored.reward.r_hr;
  out["total"] = scored.reward.total;
  out["weights"] = {{"alpha", weights.alpha}, {"beta", weights.beta}, {"gamma", weights.gamma}, {"delta", weights.delta}};
  return out;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidSpec: return 2;
    case ErrorCode::kInternal: return 4;
    default: return 3;
  }
}

}  // namespace peakrep
