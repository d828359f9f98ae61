#pragma once

// Synthetic stand-in dataset. Each sample has two planted factors: a prompt
// consistency level `match` carried by the prompt-feature store, and a noise
// amplitude `a` rendered into the image. Ground truth is
// clamp(0.6 match + 0.4 (1 - a), 0, 1).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scagiqa/embed.hpp"
#include "scagiqa/raster.hpp"
#include "scagiqa/rng.hpp"

namespace scagiqa::synth {

struct SynthOptions {
  std::filesystem::path out_dir;
  std::size_t n = 512;
  std::uint64_t seed = 7;
  std::size_t image_size = 80;
  std::size_t dim = 32;
  std::size_t n_tokens = 32;
};

struct SynthFactors {
  std::string image_id;
  double match = 0.0;
  double amplitude = 0.0;
  double mos = 0.0;
};

/// Highest radial index (cycles per image) of the smooth background.
inline constexpr int kBackgroundMaxFrequency = 2;
/// Band of the texture noise in cycles per image.
inline constexpr double kNoiseBandLow = 12.0;
inline constexpr double kNoiseBandHigh = 30.0;

double synthetic_mos(double match, double amplitude);

/// Periodic low-frequency background plus band-limited noise scaled by amplitude in [0, 1].
io::RgbImage render_image(std::size_t size, double amplitude, Rng& rng);

struct PlantedFeatures {
  embed::MultimodalFeatures original;     // F_po
  embed::MultimodalFeatures descriptive;  // F_pd
};

/// Prompt features with balanced polarity along a fixed axis; the descriptive
/// tokens copy positive-polarity prompt tokens in proportion to match.
PlantedFeatures planted_features(const std::string& prompt, const std::string& descriptive,
                                 const std::string& image_id, double match, std::size_t n_tokens,
                                 std::size_t dim, Rng& rng);

/// Writes images/, manifest.jsonl, embeddings/, factors.jsonl and a desk config.json.
std::vector<SynthFactors> synthesize(const SynthOptions& opts);

}  // namespace scagiqa::synth
