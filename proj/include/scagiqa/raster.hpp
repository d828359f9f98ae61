#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace scagiqa::io {

/// Interleaved 8-bit RGB raster, row-major.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}

  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  bool operator==(const RgbImage&) const = default;
};

/// 8-bit single-channel raster, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h, fill) {}

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  bool operator==(const GrayImage&) const = default;
};

/// Decodes binary PPM (P6) or PGM (P5) with maxval 255. PGM is replicated to RGB.
RgbImage decode_pnm(std::span<const std::uint8_t> bytes);
RgbImage decode_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_ppm(const RgbImage& img);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

/// Sub-image with top-left corner (x, y).
RgbImage crop(const RgbImage& img, std::size_t x, std::size_t y, std::size_t w, std::size_t h);

/// Grows the image to at least min_w×min_h by replicating the last row/column.
RgbImage pad_edge(const RgbImage& img, std::size_t min_w, std::size_t min_h);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace scagiqa::io
