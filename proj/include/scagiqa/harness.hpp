#pragma once

// Training, evaluation and inference drivers shared by the CLI and tests.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scagiqa/checkpoint.hpp"
#include "scagiqa/dataset.hpp"
#include "scagiqa/embed.hpp"
#include "scagiqa/hvs.hpp"
#include "scagiqa/metrics.hpp"
#include "scagiqa/run_config.hpp"

namespace scagiqa::harness {

/// A sample with its image decoded and both prompt feature sequences loaded.
struct PreparedSample {
  io::Sample sample;
  io::RgbImage image;
  embed::MultimodalFeatures descriptive;
  embed::MultimodalFeatures original;
};

/// Loads images and features. Missing images are reported together in one DataError.
std::vector<PreparedSample> prepare(const std::vector<io::Sample>& samples, const RunConfig& cfg);

hvs::HvsWeightMap crop_hvs_weights(const io::RgbImage& crop, const RunConfig& cfg);

/// Crop seed for one sample: depends on the root seed, a purpose tag, the image id and the epoch.
std::uint64_t crop_seed(std::uint64_t root, const std::string& purpose, const std::string& image_id,
                        std::uint64_t epoch = 0);

/// Per-crop scores on the normalized scale.
std::vector<double> predict_crops(const PreparedSample& s, const model::ModelParams& params, const RunConfig& cfg,
                                  std::size_t n_crops, std::uint64_t seed);

/// Mean of eval_crops crop scores, normalized scale.
double predict_sample(const PreparedSample& s, const model::ModelParams& params, const RunConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  metrics::MetricReport val;
  bool improved = false;

  std::string to_json() const;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
  std::vector<io::Sample> train_split;
  std::vector<io::Sample> val_split;
};

/// Full training protocol. Writes checkpoint.bin, train_log.jsonl and the
/// split manifests into out_dir; epoch logs also go to `log` when given.
TrainResult train(const RunConfig& cfg, const std::vector<io::Sample>& samples,
                  const std::filesystem::path& out_dir, std::ostream* log = nullptr);

struct EvalResult {
  metrics::MetricReport report;
  std::vector<double> predictions;  // original MOS scale, manifest order
};

EvalResult evaluate(const Checkpoint& ckpt, const std::vector<io::Sample>& samples,
                    const std::optional<RunConfig>& override_cfg = std::nullopt);

struct ScoreResult {
  double score = 0.0;               // original MOS scale
  std::vector<double> crop_scores;  // original MOS scale
};

/// Scores one image. P_d comes from the argument or, when absent, from the
/// configured description provider (deterministic or remote).
ScoreResult score_image(const Checkpoint& ckpt, const RunConfig& cfg, const std::filesystem::path& image,
                        const std::string& prompt, const std::optional<std::string>& descriptive,
                        const std::optional<std::string>& image_id = std::nullopt);

struct GenDescResult {
  std::vector<io::Sample> samples;
  std::vector<std::pair<std::string, std::string>> failures;  // (image id, message)
};

/// Fills missing P_d; existing values are left untouched and failures keep the sample as-is.
GenDescResult generate_descriptions(const std::vector<io::Sample>& samples, const RunConfig& cfg);

struct HvsVisualization {
  hvs::HvsWeightMap map;
  io::GrayImage heatmap;
};

/// HVS weights over the largest patch-aligned top-left region of the image.
HvsVisualization visualize_hvs(const io::RgbImage& image, std::size_t patch_size, const hvs::ViewingConfig& viewing);

/// "row col weight" lines, one per patch.
std::string weight_table(const hvs::HvsWeightMap& map);

}  // namespace scagiqa::harness
