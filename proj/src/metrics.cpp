#include "scagiqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "scagiqa/errors.hpp"

namespace scagiqa::metrics {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y, const char* name) {
  if (x.size() != y.size()) throw UndefinedMetricError(std::string(name) + ": length mismatch");
  if (x.size() < 2) throw UndefinedMetricError(std::string(name) + ": need at least 2 samples");
}

}  // namespace

std::string MetricReport::to_json() const {
  return nlohmann::json{{"srcc", srcc}, {"plcc", plcc}, {"main_score", main_score}, {"n", n}}.dump();
}

MetricReport MetricReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  return {j.at("srcc").get<double>(), j.at("plcc").get<double>(), j.at("main_score").get<double>(),
          j.at("n").get<std::size_t>()};
}

double smooth_l1(std::span<const double> pred, std::span<const double> gt, double beta) {
  if (pred.size() != gt.size()) throw ShapeError("smooth_l1: length mismatch");
  if (pred.empty()) throw ShapeError("smooth_l1: empty input");
  if (!(beta > 0)) throw ShapeError("smooth_l1: beta must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = std::abs(pred[i] - gt[i]);
    total += d < beta ? 0.5 * d * d : d - 0.5 * beta;
  }
  return total / static_cast<double>(pred.size());
}

std::vector<double> average_ranks(std::span<const double> values) {
  const auto n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double plcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "plcc");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedMetricError("plcc: zero variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double srcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "srcc");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const auto distinct = [](std::vector<double> r) {
    std::sort(r.begin(), r.end());
    return std::adjacent_find(r.begin(), r.end()) == r.end();
  };
  if (distinct(rx) && distinct(ry)) {
    const double n = static_cast<double>(x.size());
    double d2 = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
  }
  try {
    return plcc(rx, ry);
  } catch (const UndefinedMetricError&) {
    throw UndefinedMetricError("srcc: constant input, ranks are all tied");
  }
}

double main_score(double srcc_value, double plcc_value) { return (srcc_value + plcc_value) / 2.0; }

MetricReport evaluate(std::span<const double> predicted, std::span<const double> ground_truth) {
  MetricReport r;
  r.srcc = srcc(predicted, ground_truth);
  r.plcc = plcc(predicted, ground_truth);
  r.main_score = main_score(r.srcc, r.plcc);
  r.n = predicted.size();
  return r;
}

}  // namespace scagiqa::metrics
