#include "scagiqa/tensor_file.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "scagiqa/errors.hpp"
#include "scagiqa/raster.hpp"

namespace scagiqa::io {

namespace {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <class T>
T take(std::span<const std::uint8_t> bytes, std::size_t& offset, const char* what) {
  if (bytes.size() < offset || bytes.size() - offset < sizeof(T)) {
    throw DataError(std::string("tensor file truncated while reading ") + what);
  }
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out{'S', 'C', 'A', 'T'};
  put<std::uint32_t>(out, kTensorFileVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.ndim()));
  for (auto d : t.dims()) put<std::uint64_t>(out, d);
  out.reserve(out.size() + 4 * t.size());
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw DataError("refusing to serialize a non-finite tensor value");
    put<float>(out, static_cast<float>(v));
  }
  return out;
}

Tensor decode_tensor_at(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  if (bytes.size() < offset + 4 || std::memcmp(bytes.data() + offset, "SCAT", 4) != 0) {
    throw DataError("bad tensor file magic");
  }
  offset += 4;
  const auto version = take<std::uint32_t>(bytes, offset, "version");
  if (version != kTensorFileVersion) {
    throw DataError("unsupported tensor file version " + std::to_string(version));
  }
  const auto ndim = take<std::uint32_t>(bytes, offset, "ndim");
  if (ndim == 0) throw DataError("tensor file declares zero dimensions");
  Shape dims;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const auto d = take<std::uint64_t>(bytes, offset, "dims");
    if (d == 0) throw DataError("tensor file declares a zero-length dimension");
    dims.push_back(d);
    count *= d;
  }
  if ((bytes.size() - offset) / 4 < count) {
    throw DataError("tensor payload length mismatch: need " + std::to_string(count) + " values");
  }
  std::vector<double> values(count);
  for (auto& v : values) v = take<float>(bytes, offset, "payload");
  return Tensor::from(std::move(dims), std::move(values));
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  std::size_t offset = 0;
  auto t = decode_tensor_at(bytes, offset);
  if (offset != bytes.size()) {
    throw DataError("tensor payload length mismatch: " + std::to_string(bytes.size() - offset) + " trailing bytes");
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

}  // namespace scagiqa::io
