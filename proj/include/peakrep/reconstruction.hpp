#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "peakrep/representation.hpp"

namespace peakrep {

/// Natural cubic spline (zero second derivative at both ends).
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::vector<double> x, std::vector<double> y);

  double operator()(double t) const;
  std::size_t size() const { return x_.size(); }

 private:
  std::vector<double> x_, y_, m_;  // m_: second derivatives at the knots
};

struct Fidelity {
  double mae = 0.0;
  double rmse = 0.0;
  double pearson = 0.0;
};

struct FidelityReport {
  double mae = 0.0;
  double rmse = 0.0;
  double pearson_r = 0.0;
  double retention = 0.0;
  double prominent_recall = 0.0;
};

/// Dense reconstruction on [0, length). `boundary` holds the first and last
/// raw samples, added as knots at 0 and length-1 unless already present.
std::vector<double> spline_reconstruct(const PeakRepresentation& rep, std::size_t length,
                                       std::optional<std::pair<double, double>> boundary = std::nullopt);

Fidelity fidelity_metrics(std::span<const double> original, std::span<const double> recon);

/// Fraction of gt peaks with a representation entry within +-tol_samples.
/// Empty gt counts as 1.
double prominent_peak_recall(const PeakRepresentation& rep, std::span<const Index> gt_peaks, int tol_samples = 1);

struct SweepRow {
  int distance = 0;
  FidelityReport report;
};

std::vector<SweepRow> distance_sensitivity_sweep(const SignalSegment& seg, std::span<const int> distances,
                                                 int tol_samples = 1, TimeScale scale = {});

/// `distance,retention,mae,rmse,pearson,recall`
std::string sweep_csv_header();
std::string sweep_csv_row(const SweepRow& row);

}  // namespace peakrep
