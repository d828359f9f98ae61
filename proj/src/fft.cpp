#include "scagiqa/fft.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "scagiqa/errors.hpp"

namespace scagiqa::hvs {

void fft_inplace(std::span<std::complex<double>> data) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) throw ShapeError("FFT length " + std::to_string(n) + " is not a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const double step = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles computed directly per index; k = 0 is exactly (1, 0).
      const std::complex<double> w = k == 0 ? std::complex<double>(1.0, 0.0)
                                            : std::polar(1.0, step * static_cast<double>(k));
      for (std::size_t start = 0; start < n; start += len) {
        const auto a = data[start + k];
        const auto b = data[start + k + half] * w;
        data[start + k] = a + b;
        data[start + k + half] = a - b;
      }
    }
  }
}

std::vector<std::complex<double>> fft2(std::span<const double> block, std::size_t size) {
  if (!is_power_of_two(size)) throw ShapeError("fft2: size " + std::to_string(size) + " is not a power of two");
  if (block.size() != size * size) throw ShapeError("fft2: block is not size x size");
  std::vector<std::complex<double>> out(block.begin(), block.end());
  for (std::size_t r = 0; r < size; ++r) fft_inplace(std::span(out).subspan(r * size, size));
  std::vector<std::complex<double>> column(size);
  for (std::size_t c = 0; c < size; ++c) {
    for (std::size_t r = 0; r < size; ++r) column[r] = out[r * size + c];
    fft_inplace(column);
    for (std::size_t r = 0; r < size; ++r) out[r * size + c] = column[r];
  }
  return out;
}

Tensor fft2(const Tensor& patch) {
  if (patch.ndim() != 2 || patch.dim(0) != patch.dim(1)) {
    throw ShapeError("fft2: expected a square [S x S] tensor, got " + shape_str(patch.dims()));
  }
  const auto s = patch.dim(0);
  const auto spectrum = fft2(patch.data(), s);
  std::vector<double> pairs(s * s * 2);
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    pairs[2 * i] = spectrum[i].real();
    pairs[2 * i + 1] = spectrum[i].imag();
  }
  return Tensor::from({s, s, 2}, std::move(pairs));
}

}  // namespace scagiqa::hvs
