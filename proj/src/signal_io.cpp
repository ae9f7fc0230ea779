#include "peakrep/signal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "peakrep/rng.hpp"

namespace peakrep {
namespace {

using nlohmann::json;

void require(bool cond, const SignalSegment& seg, const std::string& reason) {
  if (!cond) throw Error(ErrorCode::kInvariantViolation, seg.segment_id + ": " + reason);
}

std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim_cr(text);
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

IndexList load_peaks_sidecar(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || trim_cr(lines[0]) != "index")
    throw FormatError(1, path.string() + ": expected header 'index'");
  IndexList peaks;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim_cr(lines[i]).empty()) continue;
    Index v = 0;
    if (!parse_number(lines[i], v)) throw FormatError(i + 1, path.string() + ": bad peak index");
    peaks.push_back(v);
  }
  return peaks;
}

SignalSegment load_csv(const std::filesystem::path& path, const CsvOptions& opt) {
  const auto lines = read_lines(path);
  if (lines.empty() || trim_cr(lines[0]) != "index,value")
    throw FormatError(1, "expected header 'index,value'");
  SignalSegment seg;
  seg.segment_id = path.stem().string();
  seg.subject_id = opt.subject_id.empty() ? seg.segment_id : opt.subject_id;
  seg.modality = opt.modality;
  seg.fs = opt.fs;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto row = trim_cr(lines[i]);
    if (row.empty() && i + 1 == lines.size()) break;
    const auto cols = split(row, ',');
    if (cols.size() != 2)
      throw FormatError(i + 1, "expected 2 columns, got " + std::to_string(cols.size()));
    Index idx = 0;
    double value = 0.0;
    if (!parse_number(cols[0], idx) || !parse_number(cols[1], value))
      throw FormatError(i + 1, "non-numeric field");
    if (idx != static_cast<Index>(seg.samples.size()))
      throw FormatError(i + 1, "index out of sequence");
    seg.samples.push_back(value);
  }
  auto sidecar = path;
  sidecar.replace_extension(".peaks.csv");
  if (std::filesystem::exists(sidecar)) seg.gt_peaks = load_peaks_sidecar(sidecar);
  validate(seg);
  return seg;
}

}  // namespace

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kECG: return "ECG";
    case Modality::kPPG: return "PPG";
    case Modality::kBCG: return "BCG";
    case Modality::kBSG: return "BSG";
    case Modality::kSynth: return "SYNTH";
  }
  return "SYNTH";
}

Modality modality_from_string(std::string_view text) {
  std::string up(text);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "ECG") return Modality::kECG;
  if (up == "PPG") return Modality::kPPG;
  if (up == "BCG") return Modality::kBCG;
  if (up == "BSG") return Modality::kBSG;
  if (up == "SYNTH") return Modality::kSynth;
  throw Error(ErrorCode::kInvalidSpec, "unknown modality '" + std::string(text) + "'");
}

void validate(const SignalSegment& seg) {
  require(std::isfinite(seg.fs) && seg.fs > 0.0, seg, "fs must be positive");
  require(!seg.samples.empty(), seg, "samples must be non-empty");
  require(std::all_of(seg.samples.begin(), seg.samples.end(), [](double v) { return std::isfinite(v); }),
          seg, "samples must be finite");
  const auto n = static_cast<Index>(seg.samples.size());
  for (std::size_t i = 0; i < seg.gt_peaks.size(); ++i) {
    require(seg.gt_peaks[i] >= 0 && seg.gt_peaks[i] < n, seg,
            "gt peak " + std::to_string(seg.gt_peaks[i]) + " out of range");
    if (i > 0) require(seg.gt_peaks[i] > seg.gt_peaks[i - 1], seg, "gt_peaks not strictly increasing");
  }
}

std::vector<Wave> default_template(Modality m) {
  switch (m) {
    case Modality::kECG:
      // P, Q, R, S, T
      return {{0.12, -0.20, 0.025}, {-0.15, -0.03, 0.010}, {1.0, 0.0, 0.012},
              {-0.25, 0.03, 0.012}, {0.30, 0.25, 0.050}};
    case Modality::kPPG:
      // systolic rise, decay shoulder, diastolic wave
      return {{1.0, 0.0, 0.06}, {0.35, 0.09, 0.07}, {0.40, 0.28, 0.09}};
    case Modality::kBCG:
      // H, I, J, K, L
      return {{0.20, -0.16, 0.035}, {-0.45, -0.08, 0.030}, {1.0, 0.0, 0.030},
              {-0.55, 0.08, 0.030}, {0.25, 0.17, 0.040}};
    case Modality::kBSG:
      return {{0.20, -0.16, 0.035}, {-0.50, -0.07, 0.025}, {1.0, 0.0, 0.025},
              {-0.60, 0.07, 0.025}, {0.30, 0.15, 0.040}, {0.15, 0.30, 0.050}};
    case Modality::kSynth:
      return {{1.0, 0.0, 0.05}};
  }
  return {{1.0, 0.0, 0.05}};
}

SignalSegment synthesize_segment(const SynthSpec& spec) {
  auto invalid = [](const std::string& why) { return Error(ErrorCode::kInvalidSpec, why); };
  if (!(spec.fs > 0.0)) throw invalid("fs must be positive");
  if (spec.duration_samples == 0) throw invalid("duration_samples must be positive");
  if (!(spec.mean_ibi_s * spec.fs >= 20.0)) throw invalid("mean_ibi_s * fs must be >= 20 samples");
  if (!(spec.ibi_jitter_frac >= 0.0 && spec.ibi_jitter_frac < 0.5))
    throw invalid("ibi_jitter_frac must be in [0, 0.5)");
  if (!(spec.noise_sigma >= 0.0)) throw invalid("noise_sigma must be >= 0");
  const auto waves = spec.waves.empty() ? default_template(spec.modality) : spec.waves;
  for (const auto& w : waves)
    if (!(w.width > 0.0)) throw invalid("wave width must be positive");

  const std::size_t n = spec.duration_samples;
  const double ibi_samples = spec.mean_ibi_s * spec.fs;
  Rng rng(spec.rng_seed);

  // Beat fiducials in samples; one beat before the window so its tail is present.
  std::vector<Index> centers;
  const double phase = ibi_samples * (0.25 + 0.5 * rng.uniform());
  double t = phase - ibi_samples;
  while (t < static_cast<double>(n) + ibi_samples) {
    centers.push_back(static_cast<Index>(std::llround(t)));
    t += ibi_samples * (1.0 + rng.uniform(-spec.ibi_jitter_frac, spec.ibi_jitter_frac));
  }

  SignalSegment seg;
  seg.segment_id = spec.segment_id;
  seg.subject_id = spec.subject_id;
  seg.modality = spec.modality;
  seg.fs = spec.fs;
  seg.samples.assign(n, 0.0);
  for (const Index c : centers) {
    for (const auto& w : waves) {
      const double mu = static_cast<double>(c) + w.offset * ibi_samples;
      const double sd = w.width * ibi_samples;
      const auto lo = std::max<Index>(0, static_cast<Index>(std::floor(mu - 8.0 * sd)));
      const auto hi = std::min<Index>(static_cast<Index>(n) - 1, static_cast<Index>(std::ceil(mu + 8.0 * sd)));
      for (Index i = lo; i <= hi; ++i) {
        const double z = (static_cast<double>(i) - mu) / sd;
        seg.samples[static_cast<std::size_t>(i)] += w.amplitude * std::exp(-0.5 * z * z);
      }
    }
  }

  const auto dominant = std::max_element(waves.begin(), waves.end(), [](const Wave& a, const Wave& b) {
    return a.amplitude < b.amplitude;
  });
  const auto radius = std::max<Index>(1, static_cast<Index>(std::ceil(2.0 * dominant->width * ibi_samples)));
  const auto& x = seg.samples;
  for (const Index c : centers) {
    const auto nominal = static_cast<Index>(std::llround(static_cast<double>(c) + dominant->offset * ibi_samples));
    const auto lo = std::max<Index>(1, nominal - radius);
    const auto hi = std::min<Index>(static_cast<Index>(n) - 2, nominal + radius);
    if (lo > hi) continue;
    Index best = lo;
    for (Index i = lo + 1; i <= hi; ++i)
      if (x[static_cast<std::size_t>(i)] > x[static_cast<std::size_t>(best)]) best = i;
    const auto b = static_cast<std::size_t>(best);
    if (!(x[b] > x[b - 1] && x[b] > x[b + 1])) continue;  // apex clipped by the window edge
    if (!seg.gt_peaks.empty() && best <= seg.gt_peaks.back()) continue;
    seg.gt_peaks.push_back(best);
  }

  if (spec.noise_sigma > 0.0)
    for (auto& v : seg.samples) v += spec.noise_sigma * rng.normal();
  return seg;
}

std::string format_real(double value) {
  if (value == 0.0) value = 0.0;  // drop the sign of -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string to_record(const SignalSegment& seg) {
  std::string out;
  out.reserve(seg.samples.size() * 20 + 128);
  out += "{\"segment_id\":" + json(seg.segment_id).dump();
  out += ",\"subject_id\":" + json(seg.subject_id).dump();
  out += ",\"modality\":\"" + std::string(to_string(seg.modality)) + "\"";
  out += ",\"fs\":" + format_real(seg.fs);
  out += ",\"samples\":[";
  for (std::size_t i = 0; i < seg.samples.size(); ++i) {
    if (i) out += ',';
    out += format_real(seg.samples[i]);
  }
  out += "],\"gt_peaks\":[";
  for (std::size_t i = 0; i < seg.gt_peaks.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(seg.gt_peaks[i]);
  }
  out += "],\"preprocessed\":";
  out += seg.preprocessed ? "true" : "false";
  out += '}';
  return out;
}

SignalSegment parse_record(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(line_no, std::string("malformed record: ") + e.what());
  }
  SignalSegment seg;
  try {
    seg.segment_id = j.at("segment_id").get<std::string>();
    seg.subject_id = j.at("subject_id").get<std::string>();
    seg.modality = modality_from_string(j.at("modality").get<std::string>());
    seg.fs = j.at("fs").get<double>();
    seg.samples = j.at("samples").get<std::vector<double>>();
    seg.gt_peaks = j.at("gt_peaks").get<IndexList>();
    seg.preprocessed = j.at("preprocessed").get<bool>();
  } catch (const json::exception& e) {
    throw FormatError(line_no, std::string("bad record field: ") + e.what());
  } catch (const Error& e) {
    throw FormatError(line_no, e.what());
  }
  validate(seg);
  return seg;
}

std::vector<SignalSegment> load_segments(const std::filesystem::path& path, SegmentFormat format,
                                         const CsvOptions& csv) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kFileNotFound, path.string());
  if (format == SegmentFormat::kCsv) return {load_csv(path, csv)};
  std::vector<SignalSegment> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim_cr(lines[i]).empty()) continue;
    out.push_back(parse_record(lines[i], i + 1));
  }
  return out;
}

void write_segments(const std::filesystem::path& path, std::span<const SignalSegment> segments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kFileNotFound, "cannot write " + path.string());
  for (const auto& seg : segments) out << to_record(seg) << '\n';
}

void write_csv_segment(const std::filesystem::path& path, const SignalSegment& seg) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::kFileNotFound, "cannot write " + path.string());
    out << "index,value\n";
    for (std::size_t i = 0; i < seg.samples.size(); ++i) out << i << ',' << format_real(seg.samples[i]) << '\n';
  }
  auto sidecar = path;
  sidecar.replace_extension(".peaks.csv");
  std::ofstream out(sidecar, std::ios::binary);
  out << "index\n";
  for (const Index p : seg.gt_peaks) out << p << '\n';
}

}  // namespace peakrep
