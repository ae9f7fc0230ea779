#include "peakrep/representation.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace peakrep {
namespace {

constexpr std::array<int, 12> kDaysIn2020 = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};

struct Extremum {
  Index index;
  Polarity polarity;
};

std::vector<Extremum> strict_extrema(const std::vector<double>& x) {
  std::vector<Extremum> out;
  const std::size_t n = x.size();
  std::size_t l = 1;
  while (l + 1 < n) {
    std::size_t r = l;
    while (r + 1 < n && x[r + 1] == x[l]) ++r;
    if (r + 1 < n) {
      if (x[l - 1] < x[l] && x[r + 1] < x[r])
        out.push_back({static_cast<Index>(l), Polarity::kMax});
      else if (x[l - 1] > x[l] && x[r + 1] > x[r])
        out.push_back({static_cast<Index>(l), Polarity::kMin});
    }
    l = r + 1;
  }
  return out;
}

// Keeps an extremum unless a higher-priority one of the same class sits
// closer than `distance`. Input sorted by index.
std::vector<Index> prune(const std::vector<Index>& idx, const std::vector<double>& x, int distance) {
  auto outranks = [&](Index a, Index b) {
    const double ma = std::abs(x[static_cast<std::size_t>(a)]);
    const double mb = std::abs(x[static_cast<std::size_t>(b)]);
    return ma > mb || (ma == mb && a < b);
  };
  std::vector<Index> kept;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = i; j-- > 0 && idx[i] - idx[j] < distance;)
      if (outranks(idx[j], idx[i])) {
        dominated = true;
        break;
      }
    for (std::size_t j = i + 1; !dominated && j < idx.size() && idx[j] - idx[i] < distance; ++j)
      if (outranks(idx[j], idx[i])) dominated = true;
    if (!dominated) kept.push_back(idx[i]);
  }
  return kept;
}

int parse_field(std::string_view s, std::size_t pos, std::size_t len, std::string_view ts) {
  int v = 0;
  const char* b = s.data() + pos;
  auto [ptr, ec] = std::from_chars(b, b + len, v);
  if (ec != std::errc() || ptr != b + len) throw Error(ErrorCode::kParseError, "bad timestamp '" + std::string(ts) + "'");
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::kMax: return "MAX";
    case Polarity::kMin: return "MIN";
    case Polarity::kNone: return "NONE";
  }
  return "NONE";
}

TimeScale TimeScale::parse(std::string_view text) {
  text = trim(text);
  TimeScale s{1, 1};
  const auto slash = text.find('/');
  auto num_text = text.substr(0, slash);
  auto read = [&](std::string_view t, std::int64_t& out) {
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
      throw Error(ErrorCode::kInvalidSpec, "bad time scale '" + std::string(text) + "'");
  };
  read(num_text, s.num);
  if (slash != std::string_view::npos) read(text.substr(slash + 1), s.den);
  if (s.num <= 0 || s.den <= 0) throw Error(ErrorCode::kInvalidSpec, "time scale must be positive");
  const auto g = std::gcd(s.num, s.den);
  s.num /= g;
  s.den /= g;
  return s;
}

TimeScale TimeScale::per_sample_of(double fs) {
  const auto rounded = std::llround(fs);
  if (rounded <= 0 || std::abs(fs - static_cast<double>(rounded)) > 1e-9)
    throw Error(ErrorCode::kInvalidSpec, "per-sample time scale needs an integral fs");
  return {1, rounded};
}

std::string TimeScale::to_string() const {
  return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

std::vector<CandidatePeak> extract_extrema(const SignalSegment& seg, int min_distance, ExtremaMode mode,
                                           TimeScale scale) {
  if (!seg.preprocessed) throw Error(ErrorCode::kNotPreprocessed, seg.segment_id);
  if (min_distance < 0) throw Error(ErrorCode::kInvalidSpec, "min_distance must be >= 0");
  const auto& x = seg.samples;
  const auto extrema = strict_extrema(x);

  std::vector<Index> maxima, minima;
  for (const auto& e : extrema) (e.polarity == Polarity::kMax ? maxima : minima).push_back(e.index);

  std::vector<CandidatePeak> out;
  auto emit = [&](Index i, Polarity p) {
    out.push_back({i, x[static_cast<std::size_t>(i)], p, index_to_timestamp(i, scale)});
  };

  if (min_distance == 0 && mode == ExtremaMode::kBoth) {
    std::size_t e = 0;
    for (Index i = 0; i < static_cast<Index>(x.size()); ++i) {
      Polarity p = Polarity::kNone;
      if (e < extrema.size() && extrema[e].index == i) p = extrema[e++].polarity;
      emit(i, p);
    }
    return out;
  }

  const auto kept_max = prune(maxima, x, min_distance);
  const auto kept_min = mode == ExtremaMode::kBoth ? prune(minima, x, min_distance) : std::vector<Index>{};
  std::size_t a = 0, b = 0;
  while (a < kept_max.size() || b < kept_min.size()) {
    if (b == kept_min.size() || (a < kept_max.size() && kept_max[a] < kept_min[b]))
      emit(kept_max[a++], Polarity::kMax);
    else
      emit(kept_min[b++], Polarity::kMin);
  }
  return out;
}

PeakRepresentation build_representation(const SignalSegment& seg, int min_distance, TimeScale scale) {
  PeakRepresentation rep;
  rep.segment_ref = seg.segment_id;
  rep.fs = seg.fs;
  rep.scale = scale;
  rep.min_distance = min_distance;
  rep.entries = extract_extrema(seg, min_distance, ExtremaMode::kBoth, scale);
  return rep;
}

std::string seconds_to_timestamp(std::int64_t elapsed) {
  if (elapsed < 0 || elapsed >= kMaxElapsedSeconds)
    throw Error(ErrorCode::kOutOfRange, "elapsed " + std::to_string(elapsed) + " s outside the anchor year");
  auto day = elapsed / 86400;
  const auto sec_of_day = elapsed % 86400;
  int month = 0;
  while (day >= kDaysIn2020[static_cast<std::size_t>(month)]) day -= kDaysIn2020[static_cast<std::size_t>(month++)];
  char buf[32];
  std::snprintf(buf, sizeof(buf), "2020-%02d-%02d %02d:%02d:%02d", month + 1, static_cast<int>(day) + 1,
                static_cast<int>(sec_of_day / 3600), static_cast<int>(sec_of_day / 60 % 60),
                static_cast<int>(sec_of_day % 60));
  return buf;
}

std::string index_to_timestamp(Index index, TimeScale scale) {
  if (index < 0) throw Error(ErrorCode::kOutOfRange, "negative index");
  // floor(index * num / den) without overflow for in-range values
  const auto q = index / scale.den;
  const auto r = index % scale.den;
  if (q > kMaxElapsedSeconds / scale.num) throw Error(ErrorCode::kOutOfRange, "index beyond the anchor year");
  const std::int64_t elapsed = q * scale.num + (r * scale.num) / scale.den;
  return seconds_to_timestamp(elapsed);
}

std::int64_t timestamp_to_seconds(std::string_view ts) {
  const auto t = trim(ts);
  if (t.size() != 19 || t[4] != '-' || t[7] != '-' || t[10] != ' ' || t[13] != ':' || t[16] != ':')
    throw Error(ErrorCode::kParseError, "bad timestamp '" + std::string(ts) + "'");
  const int year = parse_field(t, 0, 4, ts);
  const int month = parse_field(t, 5, 2, ts);
  const int day = parse_field(t, 8, 2, ts);
  const int hh = parse_field(t, 11, 2, ts);
  const int mm = parse_field(t, 14, 2, ts);
  const int ss = parse_field(t, 17, 2, ts);
  if (year != 2020) throw Error(ErrorCode::kWrongAnchor, "timestamp '" + std::string(ts) + "' not in 2020");
  if (month < 1 || month > 12 || day < 1 || day > kDaysIn2020[static_cast<std::size_t>(month - 1)] || hh > 23 ||
      mm > 59 || ss > 59)
    throw Error(ErrorCode::kParseError, "bad timestamp '" + std::string(ts) + "'");
  std::int64_t days = day - 1;
  for (int m = 0; m < month - 1; ++m) days += kDaysIn2020[static_cast<std::size_t>(m)];
  const std::int64_t elapsed = days * 86400 + hh * 3600 + mm * 60 + ss;
  if (elapsed >= kMaxElapsedSeconds) throw Error(ErrorCode::kOutOfRange, "timestamp beyond the anchor year");
  return elapsed;
}

Index timestamp_to_index(std::string_view ts, TimeScale scale) {
  const std::int64_t elapsed = timestamp_to_seconds(ts);
  // ceil(elapsed * den / num)
  const auto numer = elapsed * scale.den;
  return (numer + scale.num - 1) / scale.num;
}

std::string format_amplitude(double amplitude) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", amplitude);
  return buf;
}

std::string serialize(const PeakRepresentation& rep) {
  std::string out(kTsStart);
  out += '\n';
  for (const auto& e : rep.entries) {
    out += '(';
    out += e.timestamp.empty() ? index_to_timestamp(e.index, rep.scale) : e.timestamp;
    out += ", ";
    out += format_amplitude(e.amplitude);
    out += ")\n";
  }
  out += kTsEnd;
  return out;
}

PeakRepresentation parse_serialized(std::string_view text, TimeScale scale, std::string segment_ref, double fs,
                                    int min_distance) {
  const auto start = text.find(kTsStart);
  const auto end = text.find(kTsEnd);
  if (start == std::string_view::npos) throw Error(ErrorCode::kMissingSentinel, "no <TS_START>");
  if (end == std::string_view::npos || end < start) throw Error(ErrorCode::kMissingSentinel, "no <TS_END>");

  PeakRepresentation rep;
  rep.segment_ref = std::move(segment_ref);
  rep.fs = fs;
  rep.scale = scale;
  rep.min_distance = min_distance;

  std::size_t line_no = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(start), '\n'));
  auto body = text.substr(start + kTsStart.size(), end - start - kTsStart.size());
  std::int64_t last_elapsed = -1;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    const auto line = trim(body.substr(pos, nl - pos));
    const auto this_line = line_no;
    pos = nl + 1;
    if (pos <= body.size()) ++line_no;
    if (line.empty()) continue;

    const auto where = "line " + std::to_string(this_line);
    if (line.front() != '(' || line.back() != ')') throw Error(ErrorCode::kMalformedPair, where);
    const auto inner = line.substr(1, line.size() - 2);
    const auto comma = inner.find(',');
    if (comma == std::string_view::npos) throw Error(ErrorCode::kMalformedPair, where);
    const auto ts = trim(inner.substr(0, comma));
    const auto amp_text = trim(inner.substr(comma + 1));

    std::int64_t elapsed = 0;
    try {
      elapsed = timestamp_to_seconds(ts);
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedPair, where + ": " + e.what());
    }
    double amp = 0.0;
    auto [ptr, ec] = std::from_chars(amp_text.data(), amp_text.data() + amp_text.size(), amp);
    if (amp_text.empty() || ec != std::errc() || ptr != amp_text.data() + amp_text.size() || !std::isfinite(amp))
      throw Error(ErrorCode::kMalformedPair, where + ": bad amplitude");
    if (elapsed < last_elapsed) throw Error(ErrorCode::kNonMonotonicTimestamps, where);
    // Below one second per sample several indices share a timestamp; repeats
    // take the next index that still renders to the same second.
    Index index = timestamp_to_index(ts, scale);
    if (elapsed == last_elapsed) {
      index = rep.entries.back().index + 1;
      if (index_to_timestamp(index, scale) != ts) throw Error(ErrorCode::kNonMonotonicTimestamps, where);
    }
    last_elapsed = elapsed;
    rep.entries.push_back({index, amp, Polarity::kNone, std::string(ts)});
  }
  return rep;
}

double retention_ratio(const PeakRepresentation& rep, const SignalSegment& seg) {
  if (rep.segment_ref != seg.segment_id)
    throw Error(ErrorCode::kSegmentMismatch, rep.segment_ref + " vs " + seg.segment_id);
  return static_cast<double>(rep.entries.size()) / static_cast<double>(seg.samples.size());
}

}  // namespace peakrep
