#include "peakrep/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace peakrep {

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw Error(ErrorCode::kTooFewKnots, "spline needs at least 2 knots");
  for (std::size_t i = 1; i < n; ++i)
    if (!(x_[i] > x_[i - 1])) throw Error(ErrorCode::kInvalidSpec, "spline knots must be strictly increasing");

  // Thomas algorithm on the interior second derivatives.
  m_.assign(n, 0.0);
  if (n == 2) return;
  const std::size_t k = n - 2;
  std::vector<double> diag(k), upper(k), rhs(k);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x_[i] - x_[i - 1];
    const double h1 = x_[i + 1] - x_[i];
    diag[i - 1] = 2.0 * (h0 + h1);
    upper[i - 1] = h1;
    rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
  }
  for (std::size_t i = 1; i < k; ++i) {
    const double lower = x_[i + 1] - x_[i];  // h_{i} couples row i to row i-1
    const double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  m_[k] = rhs[k - 1] / diag[k - 1];
  for (std::size_t i = k - 1; i-- > 0;) m_[i + 1] = (rhs[i] - upper[i] * m_[i + 2]) / diag[i];
}

double NaturalCubicSpline::operator()(double t) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), t);
  std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  i = std::min(i, x_.size() - 2);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - t) / h;
  const double b = (t - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

std::vector<double> spline_reconstruct(const PeakRepresentation& rep, std::size_t length,
                                       std::optional<std::pair<double, double>> boundary) {
  std::map<Index, double> knots;
  for (const auto& e : rep.entries)
    if (e.index >= 0 && e.index < static_cast<Index>(length)) knots.emplace(e.index, e.amplitude);
  if (boundary && length > 0) {
    knots.emplace(0, boundary->first);
    knots.emplace(static_cast<Index>(length) - 1, boundary->second);
  }
  if (knots.size() < 2) throw Error(ErrorCode::kTooFewKnots, std::to_string(knots.size()) + " knot(s)");
  std::vector<double> x, y;
  for (const auto& [i, v] : knots) {
    x.push_back(static_cast<double>(i));
    y.push_back(v);
  }
  const NaturalCubicSpline spline(std::move(x), std::move(y));
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = spline(static_cast<double>(i));
  // exact at knots
  for (const auto& [i, v] : knots) out[static_cast<std::size_t>(i)] = v;
  return out;
}

Fidelity fidelity_metrics(std::span<const double> original, std::span<const double> recon) {
  if (original.size() != recon.size())
    throw Error(ErrorCode::kLengthMismatch, std::to_string(original.size()) + " vs " + std::to_string(recon.size()));
  if (original.size() < 2) throw Error(ErrorCode::kTooShort, "need at least 2 samples");
  const double n = static_cast<double>(original.size());
  double abs_sum = 0.0, sq_sum = 0.0, mo = 0.0, mr = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double d = recon[i] - original[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
    mo += original[i];
    mr += recon[i];
  }
  mo /= n;
  mr /= n;
  double cov = 0.0, vo = 0.0, vr = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    cov += (original[i] - mo) * (recon[i] - mr);
    vo += (original[i] - mo) * (original[i] - mo);
    vr += (recon[i] - mr) * (recon[i] - mr);
  }
  if (vo <= 0.0) throw Error(ErrorCode::kFlatInput, "original signal is flat");
  if (vr <= 0.0) throw Error(ErrorCode::kFlatInput, "reconstruction is flat");
  Fidelity f;
  f.mae = abs_sum / n;
  f.rmse = std::max(std::sqrt(sq_sum / n), f.mae);
  f.pearson = std::clamp(cov / std::sqrt(vo * vr), -1.0, 1.0);
  return f;
}

double prominent_peak_recall(const PeakRepresentation& rep, std::span<const Index> gt_peaks, int tol_samples) {
  if (gt_peaks.empty()) return 1.0;
  std::vector<Index> idx;
  idx.reserve(rep.entries.size());
  for (const auto& e : rep.entries) idx.push_back(e.index);
  std::sort(idx.begin(), idx.end());
  std::size_t hit = 0;
  for (const Index g : gt_peaks) {
    auto it = std::lower_bound(idx.begin(), idx.end(), g - tol_samples);
    if (it != idx.end() && *it <= g + tol_samples) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(gt_peaks.size());
}

std::vector<SweepRow> distance_sensitivity_sweep(const SignalSegment& seg, std::span<const int> distances,
                                                 int tol_samples, TimeScale scale) {
  if (!std::is_sorted(distances.begin(), distances.end()))
    throw Error(ErrorCode::kInvalidSpec, "distances must be sorted ascending");
  std::vector<SweepRow> rows;
  for (const int d : distances) {
    const auto rep = build_representation(seg, d, scale);
    const auto recon =
        spline_reconstruct(rep, seg.samples.size(), std::make_pair(seg.samples.front(), seg.samples.back()));
    const auto fid = fidelity_metrics(seg.samples, recon);
    SweepRow row;
    row.distance = d;
    row.report = {fid.mae, fid.rmse, fid.pearson, retention_ratio(rep, seg),
                  prominent_peak_recall(rep, seg.gt_peaks, tol_samples)};
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv_header() { return "distance,retention,mae,rmse,pearson,recall"; }

std::string sweep_csv_row(const SweepRow& row) {
  const auto& r = row.report;
  return std::to_string(row.distance) + "," + format_real(r.retention) + "," + format_real(r.mae) + "," +
         format_real(r.rmse) + "," + format_real(r.pearson_r) + "," + format_real(r.prominent_recall);
}

}  // namespace peakrep
