#pragma once

// Quality model: prompt-consistency branch (cross-attention over prompt
// features, mean pooled), visual branch (patch transformer, multi-level and
// preference fusion, adaptive pooling with contrast-sensitivity weights) and
// a top-k mixture-of-experts regression head.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scagiqa/embed.hpp"
#include "scagiqa/hvs.hpp"
#include "scagiqa/raster.hpp"
#include "scagiqa/tensor.hpp"

namespace scagiqa::model {

struct ModelConfig {
  std::size_t dim = 64;
  std::size_t vit_depth = 6;
  std::size_t heads = 8;
  std::size_t crop_size = 64;
  std::size_t patch_size = 16;
  std::size_t n_experts = 4;
  std::size_t top_k = 3;
  std::size_t expert_hidden = 128;
  /// Residual + mean pool in the consistency branch (off: bare attention).
  bool tsam_residual = false;
  /// Residual around the preference fusion (on: F'_vq = F_vq + fusion).
  bool preference_residual = true;
  /// Exclude the patch transformer from optimization.
  bool freeze_backbone = false;
  /// Feed zeros to the consistency branch (ablation).
  bool disable_sci = false;

  void validate() const;
  std::size_t grid_side() const { return crop_size / patch_size; }
  std::size_t n_patches() const { return grid_side() * grid_side(); }
  std::size_t patch_dim() const { return patch_size * patch_size * 3; }
};

/// y = x W + b with W stored [in x out].
struct Linear {
  Tensor weight;
  Tensor bias;
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
};

struct AttentionParams {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
};

struct VitBlock {
  LayerNormParams norm1;
  AttentionParams attn;
  LayerNormParams norm2;
  Linear fc1;
  Linear fc2;
};

struct Expert {
  Linear fc1;
  Linear fc2;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct ModelParams {
  Linear patch_embed;
  Tensor pos_embed;
  std::vector<VitBlock> blocks;
  Linear multilevel_fusion;
  Linear pref_query;
  Linear pref_kv;
  AttentionParams pref_attn;
  Linear pref_out;
  AttentionParams tsam;
  Linear spatial;
  Linear channel;
  std::vector<Expert> experts;
  Linear gate;

  /// Linear weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0,
  /// positional embeddings ~ N(0, 0.02), layer norms (1, 0).
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

  /// Every parameter in a fixed order with a stable dotted name.
  std::vector<NamedTensor> named() const;

  /// Parameters updated by the optimizer under cfg (all tracked).
  std::vector<Tensor> trainable(const ModelConfig& cfg) const;

  /// Deep copy with fresh leaves.
  ModelParams clone() const;
};

Tensor linear(const Tensor& x, const Linear& layer);

/// Attention weights recorded per head, each [N_q x N_k].
struct AttentionTrace {
  std::vector<Tensor> weights;
};

/// Multi-head scaled dot-product attention of query_seq over kv_seq, no residual or norm.
Tensor cross_attention(const Tensor& query_seq, const Tensor& kv_seq, const AttentionParams& params,
                       std::size_t heads, AttentionTrace* trace = nullptr);

/// SCI = mean over query tokens of cross_attention(F_pd, F_po).
Tensor compute_sci(const embed::MultimodalFeatures& descriptive, const embed::MultimodalFeatures& original,
                   const ModelParams& params, const ModelConfig& cfg);

/// Crop as a [P x patch_size²·3] matrix, pixels mapped to [-1, 1].
Tensor patchify(const io::RgbImage& crop, const ModelConfig& cfg);

/// Output of every transformer block, each [P x D].
std::vector<Tensor> vit_forward(const io::RgbImage& crop, const ModelParams& params, const ModelConfig& cfg);

/// Concatenates four [P x D] maps and projects 4D -> D.
Tensor fuse_multilevel(std::span<const Tensor> last4, const ModelParams& params);

Tensor fuse_preference(const Tensor& visual, const embed::MultimodalFeatures& original, const ModelParams& params,
                       const ModelConfig& cfg);

/// Per-patch sigmoid(linear D -> 1), shape [P x 1].
Tensor spatial_weights(const Tensor& features, const ModelParams& params);

/// sigmoid(linear(mean over patches)), shape [D].
Tensor channel_weights(const Tensor& features, const ModelParams& params);

/// Normalized (1 + W_h)-weighted average over patches of features ⊙ W_s ⊙ W_c.
/// W_h is a constant; no gradient flows into it.
Tensor aqafp_pool(const Tensor& features, const Tensor& spatial, const Tensor& channel,
                  const hvs::HvsWeightMap& hvs_map);

/// Indices of the k largest values, ties broken by lower index.
std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k);

struct MoeOutput {
  Tensor score;             // [1]
  Tensor gate_probs;        // [n_experts]
  Tensor selected_weights;  // [top_k], renormalized
  std::vector<std::size_t> selected;
};

MoeOutput moer_predict(const Tensor& sci, const Tensor& vqi, const ModelParams& params, const ModelConfig& cfg);

/// Visual branch: VQI for one crop.
Tensor compute_vqi(const io::RgbImage& crop, const embed::MultimodalFeatures& original,
                   const hvs::HvsWeightMap& hvs_map, const ModelParams& params, const ModelConfig& cfg);

/// Score for one crop given a precomputed SCI.
Tensor predict_with_sci(const Tensor& sci, const io::RgbImage& crop, const embed::MultimodalFeatures& original,
                        const hvs::HvsWeightMap& hvs_map, const ModelParams& params, const ModelConfig& cfg);

/// Full composition for one crop, shape [1].
Tensor model_forward(const io::RgbImage& crop, const embed::MultimodalFeatures& descriptive,
                     const embed::MultimodalFeatures& original, const hvs::HvsWeightMap& hvs_map,
                     const ModelParams& params, const ModelConfig& cfg);

}  // namespace scagiqa::model
