#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scagiqa/raster.hpp"

namespace scagiqa::io {

struct Sample {
  std::filesystem::path image_path;
  std::string prompt;
  std::optional<std::string> descriptive_prompt;
  double mos = 0.0;
  std::string image_id;

  bool operator==(const Sample&) const = default;
};

/// JSON Lines manifest, one object per line:
///   {"image": path, "prompt": str, "mos": number, "p_d": str?, "id": str?}
/// Relative image paths resolve against the manifest's directory; id defaults
/// to the image filename stem. Blank lines are skipped.
std::vector<Sample> load_manifest(const std::filesystem::path& path);

/// Image paths under the manifest's directory are written relative to it.
void write_manifest(const std::filesystem::path& path, std::span<const Sample> samples);

/// count top-left corners drawn uniformly from the valid range. Images
/// smaller than size are edge-replicated first.
std::vector<RgbImage> sample_crops(const RgbImage& image, std::size_t count, std::size_t size, std::uint64_t seed);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Seeded Fisher-Yates shuffle; the first floor(n * train_fraction) go to training.
std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(std::span<const Sample> samples,
                                                                  const SplitSpec& spec);

/// Min-max affine map fitted on a training split.
struct MosNormalizer {
  double lo = 0.0;
  double hi = 1.0;

  static MosNormalizer fit(std::span<const Sample> train);
  double normalize(double mos) const { return (mos - lo) / (hi - lo); }
  double denormalize(double score) const { return lo + score * (hi - lo); }
};

/// Copy of samples with MOS mapped through the normalizer.
std::vector<Sample> normalize_mos(std::span<const Sample> samples, const MosNormalizer& map);

/// Fits on the given samples and normalizes them.
std::vector<Sample> normalize_mos(std::span<const Sample> samples);

}  // namespace scagiqa::io
