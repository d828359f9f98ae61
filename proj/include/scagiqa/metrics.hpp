#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace scagiqa::metrics {

struct MetricReport {
  double srcc = 0.0;
  double plcc = 0.0;
  double main_score = 0.0;
  std::size_t n = 0;

  /// {"srcc": ..., "plcc": ..., "main_score": ..., "n": ...}
  std::string to_json() const;
  static MetricReport from_json(const std::string& text);
};

/// Mean over elements of 0.5 d² (|d| < beta) or |d| - 0.5 beta.
double smooth_l1(std::span<const double> pred, std::span<const double> gt, double beta = 1.0);

/// Average (fractional) ranks starting at 1.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation. Closed form when ranks are distinct, Pearson of
/// average ranks under ties. Throws UndefinedMetricError for n < 2 or constant input.
double srcc(std::span<const double> x, std::span<const double> y);

/// Pearson correlation with population moments. Throws UndefinedMetricError on zero variance.
double plcc(std::span<const double> x, std::span<const double> y);

double main_score(double srcc_value, double plcc_value);

MetricReport evaluate(std::span<const double> predicted, std::span<const double> ground_truth);

}  // namespace scagiqa::metrics
