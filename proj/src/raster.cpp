#include "scagiqa/raster.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "scagiqa/errors.hpp"

namespace scagiqa::io {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t number() {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      ++pos_;
      if (++digits > 9) throw DataError("PNM header: number too large");
    }
    if (digits == 0) throw DataError("PNM header: expected a number");
    return value;
  }

  // Exactly one whitespace byte separates maxval from the payload.
  void single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw DataError("PNM header: missing separator");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> encode_header(const char* magic, std::size_t w, std::size_t h) {
  const std::string header = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  return {header.begin(), header.end()};
}

}  // namespace

RgbImage decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    throw DataError("unsupported image format (expected binary PPM P6 or PGM P5)");
  }
  const bool rgb = bytes[1] == '6';
  HeaderReader r(bytes);
  r.advance(2);
  const auto w = r.number();
  const auto h = r.number();
  const auto maxval = r.number();
  if (w == 0 || h == 0) throw DataError("PNM image has zero size");
  if (maxval != 255) throw DataError("PNM maxval " + std::to_string(maxval) + " unsupported (need 255)");
  r.single_space();
  const std::size_t channels = rgb ? 3 : 1;
  const std::size_t need = w * h * channels;
  if (bytes.size() - r.pos() < need) {
    throw DataError("truncated PNM payload: need " + std::to_string(need) + " bytes, have " +
                    std::to_string(bytes.size() - r.pos()));
  }
  RgbImage img(w, h);
  const auto* src = bytes.data() + r.pos();
  if (rgb) {
    std::copy_n(src, need, img.pixels.begin());
  } else {
    for (std::size_t i = 0; i < w * h; ++i) {
      img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = src[i];
    }
  }
  return img;
}

RgbImage decode_image(const std::filesystem::path& path) { return decode_pnm(read_file(path)); }

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  auto out = encode_header("P6", img.width, img.height);
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  auto out = encode_header("P5", img.width, img.height);
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) { write_file(path, encode_ppm(img)); }
void write_pgm(const std::filesystem::path& path, const GrayImage& img) { write_file(path, encode_pgm(img)); }

RgbImage crop(const RgbImage& img, std::size_t x, std::size_t y, std::size_t w, std::size_t h) {
  if (x + w > img.width || y + h > img.height) throw ShapeError("crop window outside image");
  RgbImage out(w, h);
  for (std::size_t row = 0; row < h; ++row) {
    const auto* src = img.pixels.data() + ((y + row) * img.width + x) * 3;
    std::copy_n(src, w * 3, out.pixels.data() + row * w * 3);
  }
  return out;
}

RgbImage pad_edge(const RgbImage& img, std::size_t min_w, std::size_t min_h) {
  const auto w = std::max(img.width, min_w);
  const auto h = std::max(img.height, min_h);
  if (w == img.width && h == img.height) return img;
  RgbImage out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    const auto sy = std::min(y, img.height - 1);
    for (std::size_t x = 0; x < w; ++x) {
      const auto sx = std::min(x, img.width - 1);
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace scagiqa::io
