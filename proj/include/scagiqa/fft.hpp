#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "scagiqa/tensor.hpp"

namespace scagiqa::hvs {

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 forward DFT (unnormalized). Length must be a power of two.
void fft_inplace(std::span<std::complex<double>> data);

/// Unnormalized forward 2-D DFT of a row-major size×size real block (rows, then columns).
std::vector<std::complex<double>> fft2(std::span<const double> block, std::size_t size);

/// fft2 on a [S×S] tensor; result is [S×S×2] with (re, im) pairs in the last axis.
Tensor fft2(const Tensor& patch);

}  // namespace scagiqa::hvs
