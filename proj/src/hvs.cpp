#include "scagiqa/hvs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scagiqa/errors.hpp"
#include "scagiqa/fft.hpp"

namespace scagiqa::hvs {

void PatchGrid::validate() const {
  if (rows == 0 || cols == 0) throw ShapeError("patch grid must be non-empty");
  if (!is_power_of_two(patch_size)) {
    throw ShapeError("patch size " + std::to_string(patch_size) + " is not a power of two");
  }
}

double csf(double f) {
  if (!(f >= 0)) throw std::domain_error("csf: frequency must be non-negative");
  const double x = 0.114 * f;
  return 2.6 * (0.0192 + x) * std::exp(-std::pow(x, 1.1));
}

double bin_frequency_cpd(std::size_t u, std::size_t v, std::size_t size, const ViewingConfig& cfg) {
  const auto signed_index = [size](std::size_t k) {
    return k <= size / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(size);
  };
  const double fu = signed_index(u);
  const double fv = signed_index(v);
  const double nyquist = static_cast<double>(size) / 2.0;
  return cfg.max_frequency_cpd * std::sqrt(fu * fu + fv * fv) / nyquist;
}

double patch_sensitivity(std::span<const double> block, std::size_t size, const ViewingConfig& cfg) {
  if (!(cfg.max_frequency_cpd > 0)) throw ShapeError("max_frequency_cpd must be positive");
  const auto spectrum = fft2(block, size);
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t u = 0; u < size; ++u) {
    for (std::size_t v = 0; v < size; ++v) {
      if (cfg.dc_excluded && u == 0 && v == 0) continue;
      const double mag = std::abs(spectrum[u * size + v]);
      weighted += mag * csf(bin_frequency_cpd(u, v, size, cfg));
      total += mag;
    }
  }
  // Guards against round-off energy from an otherwise flat block.
  if (total <= 1e-12 * static_cast<double>(size * size)) return 0.0;
  return weighted / total;
}

double patch_sensitivity(const Tensor& patch, const ViewingConfig& cfg) {
  if (patch.ndim() != 2 || patch.dim(0) != patch.dim(1)) {
    throw ShapeError("patch_sensitivity: expected a square patch, got " + shape_str(patch.dims()));
  }
  return patch_sensitivity(patch.data(), patch.dim(0), cfg);
}

HvsWeightMap hvs_weights(const LumaImage& crop, const PatchGrid& grid, const ViewingConfig& cfg) {
  grid.validate();
  const auto ps = grid.patch_size;
  if (crop.width != grid.cols * ps || crop.height != grid.rows * ps) {
    throw ShapeError("hvs_weights: crop is " + std::to_string(crop.width) + "x" + std::to_string(crop.height) +
                     ", grid expects " + std::to_string(grid.cols * ps) + "x" + std::to_string(grid.rows * ps));
  }
  HvsWeightMap map{{}, grid};
  map.weights.reserve(grid.count());
  std::vector<double> block(ps * ps);
  for (std::size_t gr = 0; gr < grid.rows; ++gr) {
    for (std::size_t gc = 0; gc < grid.cols; ++gc) {
      for (std::size_t y = 0; y < ps; ++y)
        for (std::size_t x = 0; x < ps; ++x) block[y * ps + x] = crop.at(gc * ps + x, gr * ps + y);
      const double s = patch_sensitivity(block, ps, cfg);
      map.weights.push_back(1.0 / (1.0 + std::exp(-s)));
    }
  }
  return map;
}

LumaImage luminance(const io::RgbImage& rgb) {
  LumaImage out{rgb.width, rgb.height, std::vector<double>(rgb.width * rgb.height)};
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const auto* p = rgb.pixels.data() + 3 * i;
    out.values[i] = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
  }
  return out;
}

io::GrayImage render_weight_heatmap(const HvsWeightMap& map) {
  const auto& g = map.grid;
  if (map.weights.size() != g.count()) throw ShapeError("weight map does not match its grid");
  const auto ps = g.patch_size;
  io::GrayImage out(g.cols * ps, g.rows * ps, 128);
  const auto [lo, hi] = std::minmax_element(map.weights.begin(), map.weights.end());
  if (*lo == *hi) return out;
  const double span = *hi - *lo;
  for (std::size_t cell = 0; cell < g.count(); ++cell) {
    const auto level = static_cast<std::uint8_t>(std::lround(255.0 * (map.weights[cell] - *lo) / span));
    const auto r0 = (cell / g.cols) * ps;
    const auto c0 = (cell % g.cols) * ps;
    for (std::size_t y = 0; y < ps; ++y)
      for (std::size_t x = 0; x < ps; ++x) out.at(c0 + x, r0 + y) = level;
  }
  return out;
}

}  // namespace scagiqa::hvs
