#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "peakrep/detectors.hpp"
#include "peakrep/evaluation.hpp"
#include "peakrep/preprocess.hpp"
#include "peakrep/reconstruction.hpp"
#include "peakrep/representation.hpp"
#include "peakrep/reward.hpp"
#include "peakrep/signal.hpp"

namespace py = pybind11;
using namespace peakrep;

namespace {

FilterSpec filter_spec(int order, double low_hz, double high_hz, double fs, bool zero_phase) {
  FilterSpec spec;
  spec.order = order;
  spec.low_hz = low_hz;
  spec.high_hz = high_hz;
  spec.fs = fs;
  spec.zero_phase = zero_phase;
  return spec;
}

SignalSegment segment_of(std::vector<double> samples, double fs, bool preprocessed) {
  SignalSegment seg;
  seg.segment_id = "py";
  seg.subject_id = "py";
  seg.fs = fs;
  seg.samples = std::move(samples);
  seg.preprocessed = preprocessed;
  return seg;
}

py::dict segment_dict(const SignalSegment& s) {
  py::dict d;
  d["segment_id"] = s.segment_id;
  d["subject_id"] = s.subject_id;
  d["modality"] = std::string(to_string(s.modality));
  d["fs"] = s.fs;
  d["samples"] = s.samples;
  d["gt_peaks"] = s.gt_peaks;
  d["preprocessed"] = s.preprocessed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_peakrep, m) {
  static py::exception<Error> error(m, "PeakrepError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def(
      "design_bandpass",
      [](int order, double low_hz, double high_hz, double fs) {
        std::vector<std::array<double, 6>> sos;
        for (const auto& q : design_butterworth_bandpass(filter_spec(order, low_hz, high_hz, fs, true)))
          sos.push_back({q.b[0], q.b[1], q.b[2], q.a[0], q.a[1], q.a[2]});
        return sos;
      },
      py::arg("order") = 4, py::arg("low_hz") = 0.6, py::arg("high_hz") = 15.0, py::arg("fs") = 100.0,
      "Second-order sections as rows (b0, b1, b2, a0, a1, a2).");

  m.def(
      "bandpass",
      [](const std::vector<double>& x, int order, double low_hz, double high_hz, double fs, bool zero_phase) {
        return butterworth_bandpass(x, filter_spec(order, low_hz, high_hz, fs, zero_phase));
      },
      py::arg("x"), py::arg("order") = 4, py::arg("low_hz") = 0.6, py::arg("high_hz") = 15.0, py::arg("fs") = 100.0,
      py::arg("zero_phase") = true);

  m.def("zscore", [](const std::vector<double>& x) { return zscore(x); }, py::arg("x"));

  m.def(
      "synthesize",
      [](const std::string& modality, std::uint64_t seed, double fs, std::size_t duration, double ibi, double jitter,
         double noise, bool preprocess) {
        SynthSpec spec;
        spec.modality = modality_from_string(modality);
        spec.rng_seed = seed;
        spec.fs = fs;
        spec.duration_samples = duration;
        spec.mean_ibi_s = ibi;
        spec.ibi_jitter_frac = jitter;
        spec.noise_sigma = noise;
        auto seg = synthesize_segment(spec);
        if (preprocess) {
          FilterSpec f;
          f.fs = fs;
          seg = preprocess_segment(seg, f);
        }
        return segment_dict(seg);
      },
      py::arg("modality") = "ECG", py::arg("seed") = 0, py::arg("fs") = 100.0, py::arg("duration") = 1000,
      py::arg("ibi") = 1.0, py::arg("jitter") = 0.0, py::arg("noise") = 0.0, py::arg("preprocess") = false);

  m.def(
      "index_to_timestamp",
      [](Index index, std::int64_t num, std::int64_t den) { return index_to_timestamp(index, TimeScale{num, den}); },
      py::arg("index"), py::arg("num") = 1, py::arg("den") = 1);
  m.def(
      "timestamp_to_index",
      [](const std::string& ts, std::int64_t num, std::int64_t den) { return timestamp_to_index(ts, TimeScale{num, den}); },
      py::arg("ts"), py::arg("num") = 1, py::arg("den") = 1);

  m.def(
      "represent",
      [](std::vector<double> samples, double fs, int min_distance) {
        return serialize(build_representation(segment_of(std::move(samples), fs, true), min_distance));
      },
      py::arg("samples"), py::arg("fs") = 100.0, py::arg("min_distance") = 0,
      "Serialized candidate list of an already preprocessed signal.");

  m.def(
      "reconstruct",
      [](const std::string& text, std::size_t length, double first, double last) {
        return spline_reconstruct(parse_serialized(text), length, std::make_pair(first, last));
      },
      py::arg("text"), py::arg("length"), py::arg("first"), py::arg("last"));

  m.def(
      "detect",
      [](std::vector<double> samples, double fs, const std::string& algorithm) {
        DetectorConfig cfg;
        cfg.algorithm = algorithm_from_string(algorithm);
        return detect(segment_of(std::move(samples), fs, true), cfg);
      },
      py::arg("samples"), py::arg("fs"), py::arg("algorithm") = "pan_tompkins");

  m.def(
      "match",
      [](const IndexList& pred, const IndexList& gt, double fs, const std::string& tolerance) {
        const auto r = match_peaks(pred, gt, fs, TolerancePolicy::parse(tolerance));
        const auto p = prf(r);
        py::dict d;
        d["tp"] = r.tp;
        d["fp"] = r.fp;
        d["fn"] = r.fn;
        d["precision"] = p.precision;
        d["recall"] = p.recall;
        d["f1"] = p.f1;
        return d;
      },
      py::arg("pred"), py::arg("gt"), py::arg("fs"), py::arg("tolerance") = "fixed_ms:30");

  m.def(
      "welch",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto w = welch_t_test(a, b);
        return py::make_tuple(w.t_stat, w.dof, w.p_two_tailed);
      },
      py::arg("a"), py::arg("b"), "(t, dof, two-tailed p)");
  m.def("t_two_tailed_p", &student_t_two_tailed_p, py::arg("t"), py::arg("dof"));

  m.def(
      "score_output",
      [](const std::string& raw, const IndexList& gt, double fs, const std::string& label) {
        const auto s = score_model_output(raw, gt, fs, TimeScale{}, label);
        py::dict d;
        d["status"] = std::string(to_string(s.output.status));
        d["pred"] = s.pred;
        d["r_format"] = s.reward.r_format;
        d["r_detection"] = s.reward.r_detection;
        d["r_complete"] = s.reward.r_complete;
        d["r_hr"] = s.reward.r_hr;
        d["total"] = s.reward.total;
        return d;
      },
      py::arg("raw"), py::arg("gt"), py::arg("fs"), py::arg("label") = "");
}
