#include "scagiqa/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scagiqa/errors.hpp"
#include "scagiqa/fft.hpp"
#include "scagiqa/rng.hpp"

namespace scagiqa::model {

void ModelConfig::validate() const {
  if (dim == 0 || heads == 0 || dim % heads != 0) throw UsageError("dim must be a positive multiple of heads");
  if (vit_depth < 4) throw UsageError("vit_depth must be at least 4");
  if (!hvs::is_power_of_two(patch_size)) throw UsageError("patch_size must be a power of two");
  if (crop_size == 0 || crop_size % patch_size != 0) throw UsageError("crop_size must be a multiple of patch_size");
  if (n_experts == 0 || top_k == 0 || top_k > n_experts) throw UsageError("need 0 < top_k <= n_experts");
  if (expert_hidden == 0) throw UsageError("expert_hidden must be positive");
}

// ---- parameters ---------------------------------------------------------------------

namespace {

Linear make_linear(Rng& rng, std::size_t in, std::size_t out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> w(in * out);
  for (auto& v : w) v = rng.uniform(-bound, bound);
  return {Tensor::from({in, out}, std::move(w), true), Tensor::zeros({out}, true)};
}

LayerNormParams make_norm(std::size_t n) { return {Tensor::full({n}, 1.0, true), Tensor::zeros({n}, true)}; }

AttentionParams make_attention(Rng& rng, std::size_t d) {
  AttentionParams a;
  a.query = make_linear(rng, d, d);
  a.key = make_linear(rng, d, d);
  a.value = make_linear(rng, d, d);
  a.output = make_linear(rng, d, d);
  return a;
}

void add_linear(std::vector<NamedTensor>& out, const std::string& name, const Linear& l) {
  out.push_back({name + ".weight", l.weight});
  out.push_back({name + ".bias", l.bias});
}

void add_attention(std::vector<NamedTensor>& out, const std::string& name, const AttentionParams& a) {
  add_linear(out, name + ".query", a.query);
  add_linear(out, name + ".key", a.key);
  add_linear(out, name + ".value", a.value);
  add_linear(out, name + ".output", a.output);
}

void add_norm(std::vector<NamedTensor>& out, const std::string& name, const LayerNormParams& n) {
  out.push_back({name + ".gamma", n.gamma});
  out.push_back({name + ".beta", n.beta});
}

Tensor clone_leaf(const Tensor& t) {
  auto c = t.detach();
  c.set_requires_grad(t.requires_grad());
  return c;
}

Linear clone(const Linear& l) { return {clone_leaf(l.weight), clone_leaf(l.bias)}; }
LayerNormParams clone(const LayerNormParams& n) { return {clone_leaf(n.gamma), clone_leaf(n.beta)}; }
AttentionParams clone(const AttentionParams& a) {
  return {clone(a.query), clone(a.key), clone(a.value), clone(a.output)};
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, "model-init"));
  const auto d = cfg.dim;
  ModelParams p;
  p.patch_embed = make_linear(rng, cfg.patch_dim(), d);
  std::vector<double> pos(cfg.n_patches() * d);
  for (auto& v : pos) v = 0.02 * rng.normal();
  p.pos_embed = Tensor::from({cfg.n_patches(), d}, std::move(pos), true);
  for (std::size_t b = 0; b < cfg.vit_depth; ++b) {
    VitBlock blk;
    blk.norm1 = make_norm(d);
    blk.attn = make_attention(rng, d);
    blk.norm2 = make_norm(d);
    blk.fc1 = make_linear(rng, d, 4 * d);
    blk.fc2 = make_linear(rng, 4 * d, d);
    p.blocks.push_back(std::move(blk));
  }
  p.multilevel_fusion = make_linear(rng, 4 * d, d);
  p.pref_query = make_linear(rng, d, d);
  p.pref_kv = make_linear(rng, d, d);
  p.pref_attn = make_attention(rng, d);
  p.pref_out = make_linear(rng, d, d);
  p.tsam = make_attention(rng, d);
  p.spatial = make_linear(rng, d, 1);
  p.channel = make_linear(rng, d, d);
  for (std::size_t e = 0; e < cfg.n_experts; ++e) {
    Expert ex;
    ex.fc1 = make_linear(rng, 2 * d, cfg.expert_hidden);
    ex.fc2 = make_linear(rng, cfg.expert_hidden, 1);
    p.experts.push_back(std::move(ex));
  }
  p.gate = make_linear(rng, 2 * d, cfg.n_experts);
  return p;
}

std::vector<NamedTensor> ModelParams::named() const {
  std::vector<NamedTensor> out;
  add_linear(out, "vit.patch_embed", patch_embed);
  out.push_back({"vit.pos_embed", pos_embed});
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto prefix = "vit.blocks." + std::to_string(b);
    add_norm(out, prefix + ".norm1", blocks[b].norm1);
    add_attention(out, prefix + ".attn", blocks[b].attn);
    add_norm(out, prefix + ".norm2", blocks[b].norm2);
    add_linear(out, prefix + ".fc1", blocks[b].fc1);
    add_linear(out, prefix + ".fc2", blocks[b].fc2);
  }
  add_linear(out, "fusion.multilevel", multilevel_fusion);
  add_linear(out, "fusion.pref_query", pref_query);
  add_linear(out, "fusion.pref_kv", pref_kv);
  add_attention(out, "fusion.pref_attn", pref_attn);
  add_linear(out, "fusion.pref_out", pref_out);
  add_attention(out, "tsam", tsam);
  add_linear(out, "aqafp.spatial", spatial);
  add_linear(out, "aqafp.channel", channel);
  for (std::size_t e = 0; e < experts.size(); ++e) {
    add_linear(out, "moer.experts." + std::to_string(e) + ".fc1", experts[e].fc1);
    add_linear(out, "moer.experts." + std::to_string(e) + ".fc2", experts[e].fc2);
  }
  add_linear(out, "moer.gate", gate);
  return out;
}

std::vector<Tensor> ModelParams::trainable(const ModelConfig& cfg) const {
  std::vector<Tensor> out;
  for (auto& nt : named()) {
    if (cfg.freeze_backbone && nt.name.starts_with("vit.")) continue;
    out.push_back(nt.tensor);
  }
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams p;
  p.patch_embed = model::clone(patch_embed);
  p.pos_embed = clone_leaf(pos_embed);
  for (const auto& b : blocks) {
    p.blocks.push_back({model::clone(b.norm1), model::clone(b.attn), model::clone(b.norm2), model::clone(b.fc1),
                        model::clone(b.fc2)});
  }
  p.multilevel_fusion = model::clone(multilevel_fusion);
  p.pref_query = model::clone(pref_query);
  p.pref_kv = model::clone(pref_kv);
  p.pref_attn = model::clone(pref_attn);
  p.pref_out = model::clone(pref_out);
  p.tsam = model::clone(tsam);
  p.spatial = model::clone(spatial);
  p.channel = model::clone(channel);
  for (const auto& e : experts) p.experts.push_back({model::clone(e.fc1), model::clone(e.fc2)});
  p.gate = model::clone(gate);
  return p;
}

// ---- building blocks -------------------------------------------------------------------

Tensor linear(const Tensor& x, const Linear& layer) {
  if (x.ndim() == 1) {
    auto y = add_row(matmul(reshape(x, {1, x.size()}), layer.weight), layer.bias);
    return reshape(y, {y.size()});
  }
  return add_row(matmul(x, layer.weight), layer.bias);
}

Tensor cross_attention(const Tensor& query_seq, const Tensor& kv_seq, const AttentionParams& params,
                       std::size_t heads, AttentionTrace* trace) {
  if (query_seq.ndim() != 2 || kv_seq.ndim() != 2) throw ShapeError("cross_attention: inputs must be 2-d");
  const auto d = query_seq.dim(1);
  if (kv_seq.dim(1) != d || params.query.weight.dim(0) != d) {
    throw ShapeError("cross_attention: feature dims disagree (" + shape_str(query_seq.dims()) + " vs " +
                     shape_str(kv_seq.dims()) + ")");
  }
  if (heads == 0 || d % heads != 0) throw ShapeError("cross_attention: dim not divisible by heads");
  const auto q = linear(query_seq, params.query);
  const auto k = linear(kv_seq, params.key);
  const auto v = linear(kv_seq, params.value);
  const auto dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto qh = slice_cols(q, h * dh, dh);
    const auto kh = slice_cols(k, h * dh, dh);
    const auto vh = slice_cols(v, h * dh, dh);
    const auto attn = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), 1);
    if (trace) trace->weights.push_back(attn);
    outs.push_back(matmul(attn, vh));
  }
  return linear(heads == 1 ? outs[0] : concat(std::span<const Tensor>(outs)), params.output);
}

Tensor compute_sci(const embed::MultimodalFeatures& descriptive, const embed::MultimodalFeatures& original,
                   const ModelParams& params, const ModelConfig& cfg) {
  if (descriptive.dim() != cfg.dim || original.dim() != cfg.dim) {
    throw ShapeError("compute_sci: feature dim " + std::to_string(descriptive.dim()) + "/" +
                     std::to_string(original.dim()) + " does not match model dim " + std::to_string(cfg.dim));
  }
  Tensor query = descriptive.tokens;
  Tensor kv = original.tokens;
  if (cfg.disable_sci) {
    query = Tensor::zeros(query.dims());
    kv = Tensor::zeros(kv.dims());
  }
  auto attended = cross_attention(query, kv, params.tsam, cfg.heads);
  if (cfg.tsam_residual) attended = add(attended, query);
  return mean_pool(attended, 0);
}

Tensor patchify(const io::RgbImage& crop, const ModelConfig& cfg) {
  if (crop.width != cfg.crop_size || crop.height != cfg.crop_size) {
    throw ShapeError("crop is " + std::to_string(crop.width) + "x" + std::to_string(crop.height) + ", model expects " +
                     std::to_string(cfg.crop_size) + "x" + std::to_string(cfg.crop_size));
  }
  const auto ps = cfg.patch_size;
  const auto side = cfg.grid_side();
  std::vector<double> out(cfg.n_patches() * cfg.patch_dim());
  std::size_t i = 0;
  for (std::size_t gr = 0; gr < side; ++gr)
    for (std::size_t gc = 0; gc < side; ++gc)
      for (std::size_t y = 0; y < ps; ++y)
        for (std::size_t x = 0; x < ps; ++x)
          for (std::size_t c = 0; c < 3; ++c) out[i++] = crop.at(gc * ps + x, gr * ps + y, c) / 127.5 - 1.0;
  return Tensor::from({cfg.n_patches(), cfg.patch_dim()}, std::move(out));
}

std::vector<Tensor> vit_forward(const io::RgbImage& crop, const ModelParams& params, const ModelConfig& cfg) {
  auto x = add(linear(patchify(crop, cfg), params.patch_embed), params.pos_embed);
  std::vector<Tensor> outputs;
  outputs.reserve(params.blocks.size());
  for (const auto& blk : params.blocks) {
    const auto h1 = layer_norm(x, blk.norm1.gamma, blk.norm1.beta);
    x = add(x, cross_attention(h1, h1, blk.attn, cfg.heads));
    const auto h2 = layer_norm(x, blk.norm2.gamma, blk.norm2.beta);
    x = add(x, linear(gelu(linear(h2, blk.fc1)), blk.fc2));
    outputs.push_back(x);
  }
  return outputs;
}

Tensor fuse_multilevel(std::span<const Tensor> last4, const ModelParams& params) {
  if (last4.size() != 4) throw ShapeError("fuse_multilevel: expected four feature maps");
  for (const auto& t : last4) {
    if (t.dims() != last4[0].dims() || t.ndim() != 2) throw ShapeError("fuse_multilevel: feature maps disagree");
  }
  return linear(concat(last4), params.multilevel_fusion);
}

Tensor fuse_preference(const Tensor& visual, const embed::MultimodalFeatures& original, const ModelParams& params,
                       const ModelConfig& cfg) {
  if (visual.ndim() != 2 || visual.dim(1) != original.dim()) {
    throw ShapeError("fuse_preference: visual " + shape_str(visual.dims()) + " vs prompt features " +
                     shape_str(original.tokens.dims()));
  }
  const auto attended = cross_attention(linear(visual, params.pref_query), linear(original.tokens, params.pref_kv),
                                        params.pref_attn, cfg.heads);
  const auto fused = linear(attended, params.pref_out);
  return cfg.preference_residual ? add(visual, fused) : fused;
}

Tensor spatial_weights(const Tensor& features, const ModelParams& params) {
  return sigmoid(linear(features, params.spatial));
}

Tensor channel_weights(const Tensor& features, const ModelParams& params) {
  return sigmoid(linear(mean_pool(features, 0), params.channel));
}

Tensor aqafp_pool(const Tensor& features, const Tensor& spatial, const Tensor& channel,
                  const hvs::HvsWeightMap& hvs_map) {
  if (features.ndim() != 2) throw ShapeError("aqafp_pool: features must be [P x D]");
  const auto p = features.dim(0);
  if (hvs_map.weights.size() != p) {
    throw ShapeError("aqafp_pool: " + std::to_string(hvs_map.weights.size()) + " HVS weights for " +
                     std::to_string(p) + " patches");
  }
  const auto modulated = mul_row(mul_col(features, spatial), channel);
  double total = 0.0;
  for (double w : hvs_map.weights) total += 1.0 + w;
  std::vector<double> pool(p);
  for (std::size_t i = 0; i < p; ++i) pool[i] = (1.0 + hvs_map.weights[i]) / total;
  const auto pooled = matmul(Tensor::from({1, p}, std::move(pool)), modulated);
  return reshape(pooled, {pooled.size()});
}

std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k) {
  if (k > values.size()) throw ShapeError("top_k larger than candidate count");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  idx.resize(k);
  return idx;
}

MoeOutput moer_predict(const Tensor& sci, const Tensor& vqi, const ModelParams& params, const ModelConfig& cfg) {
  if (sci.ndim() != 1 || vqi.ndim() != 1 || sci.size() != cfg.dim || vqi.size() != cfg.dim) {
    throw ShapeError("moer_predict: SCI and VQI must both be length-" + std::to_string(cfg.dim) + " vectors");
  }
  if (cfg.top_k > params.experts.size()) throw ShapeError("moer_predict: top_k exceeds expert count");
  const auto z = concat({sci, vqi});
  MoeOutput out;
  out.gate_probs = softmax(linear(z, params.gate), 0);
  out.selected = top_k_indices(out.gate_probs.data(), cfg.top_k);
  const auto picked = gather(out.gate_probs, out.selected);
  out.selected_weights = div_scalar(picked, sum(picked));
  std::vector<Tensor> expert_scores;
  for (auto e : out.selected) {
    const auto& ex = params.experts[e];
    expert_scores.push_back(linear(gelu(linear(z, ex.fc1)), ex.fc2));
  }
  out.score = sum(mul(out.selected_weights, concat(std::span<const Tensor>(expert_scores))));
  return out;
}

Tensor compute_vqi(const io::RgbImage& crop, const embed::MultimodalFeatures& original,
                   const hvs::HvsWeightMap& hvs_map, const ModelParams& params, const ModelConfig& cfg) {
  const auto levels = vit_forward(crop, params, cfg);
  const auto fused = fuse_multilevel(std::span<const Tensor>(levels).last(4), params);
  const auto refined = fuse_preference(fused, original, params, cfg);
  return aqafp_pool(refined, spatial_weights(refined, params), channel_weights(refined, params), hvs_map);
}

Tensor predict_with_sci(const Tensor& sci, const io::RgbImage& crop, const embed::MultimodalFeatures& original,
                        const hvs::HvsWeightMap& hvs_map, const ModelParams& params, const ModelConfig& cfg) {
  return moer_predict(sci, compute_vqi(crop, original, hvs_map, params, cfg), params, cfg).score;
}

Tensor model_forward(const io::RgbImage& crop, const embed::MultimodalFeatures& descriptive,
                     const embed::MultimodalFeatures& original, const hvs::HvsWeightMap& hvs_map,
                     const ModelParams& params, const ModelConfig& cfg) {
  const auto sci = compute_sci(descriptive, original, params, cfg);
  return predict_with_sci(sci, crop, original, hvs_map, params, cfg);
}

}  // namespace scagiqa::model
