#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "peakrep/app.hpp"

namespace peakrep {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::kConfigError, what); }

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) config_error(where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) config_error("unknown key '" + where + "." + key + "'");
}

template <class T>
void read(const json& obj, const char* key, T& into, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception&) {
    config_error("bad type for '" + where + "." + key + "'");
  }
}

const char* hrv_name(HrvMetric m) { return m == HrvMetric::kSdnn ? "sdnn" : "rmssd"; }

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  allow_keys(j, "config",
             {"inputs", "input_format", "csv", "out", "window_len", "filter", "representation", "distances",
              "detectors", "tolerance", "hrv_metric", "reward", "noise", "cv", "seed", "jobs", "serve"});
  read(j, "inputs", c.inputs, "config");
  if (j.contains("input_format")) {
    std::string f;
    read(j, "input_format", f, "config");
    if (f == "records") {
      c.input_format = SegmentFormat::kRecords;
    } else if (f == "csv") {
      c.input_format = SegmentFormat::kCsv;
    } else {
      config_error("input_format must be records or csv");
    }
  }
  if (j.contains("csv")) {
    const auto& o = j["csv"];
    allow_keys(o, "csv", {"fs", "modality", "subject_id"});
    read(o, "fs", c.csv.fs, "csv");
    read(o, "subject_id", c.csv.subject_id, "csv");
    if (o.contains("modality")) {
      std::string m;
      read(o, "modality", m, "csv");
      try {
        c.csv.modality = modality_from_string(m);
      } catch (const Error& e) {
        config_error(e.what());
      }
    }
  }
  read(j, "out", c.out, "config");
  read(j, "window_len", c.window_len, "config");
  if (j.contains("filter")) {
    const auto& o = j["filter"];
    allow_keys(o, "filter", {"order", "low_hz", "high_hz", "zero_phase"});
    read(o, "order", c.filter.order, "filter");
    read(o, "low_hz", c.filter.low_hz, "filter");
    read(o, "high_hz", c.filter.high_hz, "filter");
    read(o, "zero_phase", c.filter.zero_phase, "filter");
  }
  if (j.contains("representation")) {
    const auto& o = j["representation"];
    allow_keys(o, "representation", {"min_distance", "ts_scale"});
    read(o, "min_distance", c.min_distance, "representation");
    if (o.contains("ts_scale")) {
      std::string s;
      read(o, "ts_scale", s, "representation");
      try {
        c.ts_scale = TimeScale::parse(s);
      } catch (const Error& e) {
        config_error(e.what());
      }
    }
  }
  read(j, "distances", c.distances, "config");
  if (j.contains("detectors")) {
    if (!j["detectors"].is_array()) config_error("detectors must be an array");
    for (const auto& d : j["detectors"]) {
      allow_keys(d, "detectors[]", {"algorithm", "params", "refractory_s"});
      DetectorConfig dc;
      std::string name;
      read(d, "algorithm", name, "detectors[]");
      try {
        dc.algorithm = algorithm_from_string(name);
      } catch (const Error& e) {
        config_error(e.what());
      }
      read(d, "params", dc.params, "detectors[]");
      read(d, "refractory_s", dc.refractory_s, "detectors[]");
      c.detectors.push_back(std::move(dc));
    }
  }
  if (j.contains("tolerance")) {
    std::string t;
    read(j, "tolerance", t, "config");
    try {
      c.tolerance = TolerancePolicy::parse(t);
    } catch (const Error& e) {
      config_error(e.what());
    }
  }
  if (j.contains("hrv_metric")) {
    std::string m;
    read(j, "hrv_metric", m, "config");
    if (m == "sdnn") {
      c.hrv = HrvMetric::kSdnn;
    } else if (m == "rmssd") {
      c.hrv = HrvMetric::kRmssd;
    } else {
      config_error("hrv_metric must be sdnn or rmssd");
    }
  }
  if (j.contains("reward")) {
    const auto& o = j["reward"];
    allow_keys(o, "reward", {"alpha", "beta", "gamma", "delta", "tol_ms"});
    read(o, "alpha", c.weights.alpha, "reward");
    read(o, "beta", c.weights.beta, "reward");
    read(o, "gamma", c.weights.gamma, "reward");
    read(o, "delta", c.weights.delta, "reward");
    read(o, "tol_ms", c.reward_tol_ms, "reward");
  }
  if (j.contains("noise")) {
    allow_keys(j["noise"], "noise", {"sigmas"});
    read(j["noise"], "sigmas", c.noise_sigmas, "noise");
  }
  if (j.contains("cv")) {
    allow_keys(j["cv"], "cv", {"k"});
    read(j["cv"], "k", c.cv_k, "cv");
  }
  read(j, "seed", c.seed, "config");
  read(j, "jobs", c.jobs, "config");
  if (j.contains("serve")) {
    const auto& o = j["serve"];
    allow_keys(o, "serve", {"host", "port", "static_dir"});
    read(o, "host", c.host, "serve");
    read(o, "port", c.port, "serve");
    read(o, "static_dir", c.static_dir, "serve");
  }
  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  try {
    FilterSpec f = c.filter;
    f.fs = std::isfinite(f.high_hz) && f.high_hz > 0.0 ? 4.0 * f.high_hz : 1.0;  // the real fs comes with each segment
    validate(f);
    for (const auto& d : c.detectors) validate(d);
    validate(c.tolerance);
    validate(c.weights);
  } catch (const Error& e) {
    config_error(e.what());
  }
  if (c.window_len == 0) config_error("window_len must be positive");
  if (c.min_distance < 0) config_error("representation.min_distance must be >= 0");
  if (!(c.reward_tol_ms > 0.0)) config_error("reward.tol_ms must be positive");
  for (std::size_t i = 0; i < c.distances.size(); ++i)
    if (c.distances[i] < 0 || (i && c.distances[i] <= c.distances[i - 1]))
      config_error("distances must be non-negative and strictly increasing");
  for (const double s : c.noise_sigmas)
    if (!(s >= 0.0)) config_error("noise sigmas must be >= 0");
  if (c.cv_k < 2) config_error("cv.k must be at least 2");
  if (c.jobs == 0) config_error("jobs must be at least 1");
  if (c.port < 0 || c.port > 65535) config_error("serve.port out of range");
}

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["inputs"] = c.inputs;
  j["input_format"] = c.input_format == SegmentFormat::kCsv ? "csv" : "records";
  j["csv"] = {{"fs", c.csv.fs}, {"modality", std::string(to_string(c.csv.modality))}, {"subject_id", c.csv.subject_id}};
  j["out"] = c.out;
  j["window_len"] = c.window_len;
  j["filter"] = {{"order", c.filter.order},
                 {"low_hz", c.filter.low_hz},
                 {"high_hz", c.filter.high_hz},
                 {"zero_phase", c.filter.zero_phase}};
  j["representation"] = {{"min_distance", c.min_distance}, {"ts_scale", c.ts_scale.to_string()}};
  j["distances"] = c.distances;
  auto& dets = j["detectors"] = ordered_json::array();
  for (const auto& d : c.detectors)
    dets.push_back({{"algorithm", std::string(to_string(d.algorithm))}, {"params", d.params}, {"refractory_s", d.refractory_s}});
  j["tolerance"] = c.tolerance.to_string();
  j["hrv_metric"] = hrv_name(c.hrv);
  j["reward"] = {{"alpha", c.weights.alpha},
                 {"beta", c.weights.beta},
                 {"gamma", c.weights.gamma},
                 {"delta", c.weights.delta},
                 {"tol_ms", c.reward_tol_ms}};
  j["noise"] = {{"sigmas", c.noise_sigmas}};
  j["cv"] = {{"k", c.cv_k}};
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["serve"] = {{"host", c.host}, {"port", c.port}, {"static_dir", c.static_dir}};
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return config_from_json(json::parse(ss.str()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
}

}  // namespace peakrep
