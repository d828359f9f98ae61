#pragma once

// Binary tensor container:
//   "SCAT" | u32 version (=1) | u32 ndim | ndim x u64 dims | product(dims) x f32
// All integers and floats little-endian. Values are narrowed to 32 bits on write.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "scagiqa/tensor.hpp"

namespace scagiqa::io {

inline constexpr std::uint32_t kTensorFileVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);

/// Decodes one record starting at offset; advances offset past it.
Tensor decode_tensor_at(std::span<const std::uint8_t> bytes, std::size_t& offset);

/// Decodes a buffer holding exactly one record; trailing bytes are an error.
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace scagiqa::io
