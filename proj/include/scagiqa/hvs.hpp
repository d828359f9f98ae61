#pragma once

// Contrast-sensitivity weighting of image patches.

#include <cstddef>
#include <span>
#include <vector>

#include "scagiqa/raster.hpp"
#include "scagiqa/tensor.hpp"

namespace scagiqa::hvs {

struct PatchGrid {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::size_t patch_size = 16;

  std::size_t count() const { return rows * cols; }
  void validate() const;
};

/// Maps DFT bin radius to cycles per degree. The Nyquist radius is max_frequency_cpd.
struct ViewingConfig {
  double max_frequency_cpd = 32.0;
  bool dc_excluded = true;
};

struct HvsWeightMap {
  std::vector<double> weights;  // row-major over the grid, each in (0, 1)
  PatchGrid grid;
};

/// Luminance raster with values in [0, 1], row-major.
struct LumaImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
};

/// A(f) = 2.6 (0.0192 + 0.114 f) exp(-(0.114 f)^1.1), f in cycles per degree.
double csf(double f);

/// Spatial frequency in cycles per degree of DFT bin (u, v) of a size×size block.
double bin_frequency_cpd(std::size_t u, std::size_t v, std::size_t size, const ViewingConfig& cfg);

/// Magnitude-weighted mean of A(f) over the spectrum (DC optionally excluded).
/// A block without (non-DC) energy scores 0.
double patch_sensitivity(std::span<const double> block, std::size_t size, const ViewingConfig& cfg);
double patch_sensitivity(const Tensor& patch, const ViewingConfig& cfg);

/// W_h = sigmoid(patch_sensitivity) per grid cell, cells enumerated row-major.
HvsWeightMap hvs_weights(const LumaImage& crop, const PatchGrid& grid, const ViewingConfig& cfg);

/// Y = (0.299 R + 0.587 G + 0.114 B) / 255.
LumaImage luminance(const io::RgbImage& rgb);

/// Each cell becomes a patch_size² block of round(255 (w - min) / (max - min)); flat maps render as 128.
io::GrayImage render_weight_heatmap(const HvsWeightMap& map);

}  // namespace scagiqa::hvs
