#pragma once

// Slow, independent reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace scagiqa::testing {

/// O(S^4) forward 2-D DFT straight from the definition.
inline std::vector<std::complex<double>> naive_dft2(std::span<const double> x, std::size_t s) {
  std::vector<std::complex<double>> out(s * s);
  const double w = -2.0 * std::numbers::pi / static_cast<double>(s);
  for (std::size_t u = 0; u < s; ++u) {
    for (std::size_t v = 0; v < s; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t m = 0; m < s; ++m) {
        for (std::size_t n = 0; n < s; ++n) {
          // Reduce the phase index first so large products stay exact.
          const auto k = static_cast<double>((u * m + v * n) % s);
          acc += x[m * s + n] * std::polar(1.0, w * k);
        }
      }
      out[u * s + v] = acc;
    }
  }
  return out;
}

/// Ranks via stable sort; tied runs share the mean of their positions (1-based).
inline std::vector<double> stable_sort_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Pearson correlation from explicitly centered sums.
inline double direct_pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double brute_force_spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = stable_sort_ranks(x);
  const auto ry = stable_sort_ranks(y);
  return direct_pearson(rx, ry);
}

}  // namespace scagiqa::testing
