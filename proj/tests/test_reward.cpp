#include <doctest.h>

#include <cmath>

#include "peakrep/reward.hpp"
#include "peakrep/rng.hpp"

using namespace peakrep;

TEST_CASE("parse model output") {
  auto o = parse_model_output("J: [2020-01-01 00:00:17, 2020-01-01 00:01:51] Explanation: two clear J waves", "J");
  CHECK(o.ok());
  CHECK(o.peak_label == "J");
  CHECK(o.timestamps == std::vector<std::string>{"2020-01-01 00:00:17", "2020-01-01 00:01:51"});
  CHECK(o.explanation == "two clear J waves");

  o = parse_model_output("J: [] Explanation: none");
  CHECK(o.ok());
  CHECK(o.timestamps.empty());

  CHECK(parse_model_output("R peaks are here").status == ParseStatus::kMalformed);
  CHECK(parse_model_output("{R: [2020-01-01 00:00:01]}").ok());
  CHECK(parse_model_output("  {  R :[ 2020-01-01 00:00:01 ,2020-01-01 00:00:02 ]  }  ").ok());
  CHECK(parse_model_output("{R: [2020-01-01 00:00:01]").status == ParseStatus::kMalformed);
  CHECK(parse_model_output("R: [2020-01-01 00:00:01] trailing words").status == ParseStatus::kMalformed);
  CHECK(parse_model_output("R: [2021-01-01 00:00:01]").status == ParseStatus::kMalformed);
  CHECK(parse_model_output("R: [2020-01-01 00:00:05, 2020-01-01 00:00:01]").status == ParseStatus::kNonMonotonic);
  CHECK(parse_model_output("R: [2020-01-01 00:00:05, 2020-01-01 00:00:05]").status == ParseStatus::kNonMonotonic);
  const auto mismatch = parse_model_output("R: [2020-01-01 00:00:05]", "J");
  CHECK(mismatch.status == ParseStatus::kLabelMismatch);
  CHECK(mismatch.has_peak_list());
  CHECK(parse_model_output("").status == ParseStatus::kMalformed);
  CHECK(parse_model_output("{}").status == ParseStatus::kMalformed);
}

TEST_CASE("format reward") {
  CHECK(format_reward(parse_model_output("{J: [2020-01-01 00:00:01] Explanation: x}", "J")) == 1.0);
  CHECK(format_reward(parse_model_output("nothing", "J")) == 0.0);
  CHECK(format_reward(parse_model_output("J: [2020-01-01 00:00:09, 2020-01-01 00:00:01]", "J")) == 0.0);
  CHECK(format_reward(parse_model_output("R: [2020-01-01 00:00:01]", "J")) == 0.0);
  // explanation content never matters
  CHECK(format_reward(parse_model_output("J: [2020-01-01 00:00:01] Explanation: amplitude 999.0", "J")) == 1.0);
}

TEST_CASE("component rewards") {
  const IndexList gt{0, 100, 200, 300, 400, 500, 600, 700, 800, 900};
  CHECK(detection_reward(gt, gt, 100.0) == 1.0);
  CHECK(detection_reward(IndexList{}, gt, 100.0) == 0.0);
  IndexList nine_plus_one(gt.begin(), gt.end() - 1);
  nine_plus_one.push_back(950);
  CHECK(detection_reward(nine_plus_one, gt, 100.0) == doctest::Approx(0.9));

  CHECK(complete_reward(7, 7) == 1.0);
  CHECK(std::fabs(complete_reward(3, 4) - std::exp(-1.0)) < 1e-12);
  CHECK(complete_reward(4, 3) == complete_reward(3, 4));
  const double far = complete_reward(0, 100);
  CHECK(far > 0.0);
  CHECK(far < 1e-40);

  CHECK(hr_consistency_reward(gt, gt, 100.0) == 1.0);
  // 63 bpm against 60 bpm at 63 Hz
  CHECK(std::fabs(hr_consistency_reward(IndexList{0, 60, 120}, IndexList{0, 63, 126}, 63.0) - std::exp(-0.1)) < 1e-12);
  CHECK(hr_consistency_reward(IndexList{5}, gt, 100.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(hr_consistency_reward(IndexList{0, 10}, gt, 100.0) == doctest::Approx(std::exp(-2.0)));
  CHECK_THROWS_AS(hr_consistency_reward(gt, IndexList{3}, 100.0), Error);
}

TEST_CASE("total reward") {
  CHECK(total_reward(1, 1, 1, 1).total == 1.0);
  CHECK(total_reward(1, 0.9, std::exp(-1.0), 1).total == doctest::Approx(0.1 + 0.54 + 0.15 * std::exp(-1.0) + 0.15));
  CHECK(total_reward(1, 0.9, std::exp(-1.0), 1, RewardWeights{0, 0, 0, 0}).total == 0.0);
  const RewardWeights w{0.3, 0.2, 0.4, 0.1};
  const auto b = total_reward(0.5, 0.25, 0.75, 1.0, w);
  CHECK(std::fabs(b.total - (0.3 * 0.5 + 0.2 * 0.25 + 0.4 * 0.75 + 0.1)) < 1e-12);
  CHECK(b.weights.gamma == 0.4);
  CHECK_THROWS_AS(validate(RewardWeights{-0.1, 0.6, 0.15, 0.15}), Error);
  // monotone in every component
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    double c[4] = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    const double base = total_reward(c[0], c[1], c[2], c[3]).total;
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    for (int k = 0; k < 4; ++k) {
      double d[4] = {c[0], c[1], c[2], c[3]};
      d[k] = std::min(1.0, d[k] + 0.1);
      CHECK(total_reward(d[0], d[1], d[2], d[3]).total >= base);
    }
  }
}

TEST_CASE("timestamps to indices") {
  const std::vector<std::string> ts{"2020-01-01 00:00:01", "2020-01-01 00:00:03"};
  CHECK(timestamps_to_indices(ts, TimeScale{}) == IndexList{1, 3});
  CHECK(timestamps_to_indices(ts, TimeScale{1, 100}) == IndexList{100, 300});
  CHECK(timestamps_to_indices(std::vector<std::string>{"2020-01-01 00:00:01", "2020-01-01 00:00:01"}, TimeScale{2, 1}) ==
        IndexList{1});
}

TEST_CASE("score model output") {
  const IndexList gt{17, 111, 205};
  const auto perfect = score_model_output(
      "{J: [2020-01-01 00:00:17, 2020-01-01 00:01:51, 2020-01-01 00:03:25] Explanation: ok}", gt, 100.0, TimeScale{}, "J");
  CHECK(perfect.pred == gt);
  CHECK(perfect.reward.total == 1.0);
  const auto garbage = score_model_output("no answer", gt, 100.0, TimeScale{}, "J");
  CHECK(garbage.reward.total == 0.0);
  CHECK(garbage.reward.r_complete == 0.0);
  const auto wrong_label = score_model_output("R: [2020-01-01 00:00:17, 2020-01-01 00:01:51, 2020-01-01 00:03:25]", gt,
                                              100.0, TimeScale{}, "J");
  CHECK(wrong_label.reward.r_format == 0.0);
  CHECK(wrong_label.reward.r_detection == 1.0);
  CHECK(wrong_label.reward.total == doctest::Approx(0.9));
}

TEST_CASE("format then parse is the identity") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    ModelOutput o;
    o.status = ParseStatus::kOk;
    o.peak_label = std::string(1, static_cast<char>('A' + rng.below(26))) + (rng.below(2) ? "_1" : "");
    std::int64_t s = 0;
    for (std::uint64_t k = rng.below(8); k > 0; --k) {
      s += 1 + static_cast<std::int64_t>(rng.below(200));
      o.timestamps.push_back(seconds_to_timestamp(s));
    }
    o.explanation = rng.below(3) ? "peak at 00:00:0" + std::to_string(rng.below(10)) + " {nested} text" : "";
    const auto text = format_model_output(o);
    const auto back = parse_model_output(text, o.peak_label);
    CHECK(back.status == ParseStatus::kOk);
    CHECK(back.peak_label == o.peak_label);
    CHECK(back.timestamps == o.timestamps);
    CHECK(back.explanation == o.explanation);
    CHECK(format_model_output(back) == text);
  }
}

TEST_CASE("default labels") {
  CHECK(default_peak_label(Modality::kECG) == "R");
  CHECK(default_peak_label(Modality::kPPG) == "SP");
  CHECK(default_peak_label(Modality::kBCG) == "J");
  CHECK(default_peak_label(Modality::kBSG) == "J");
}
