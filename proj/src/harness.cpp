#include "scagiqa/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "scagiqa/errors.hpp"
#include "scagiqa/rng.hpp"

namespace scagiqa::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<PreparedSample> prepare(const std::vector<io::Sample>& samples, const RunConfig& cfg) {
  std::vector<std::string> missing;
  for (const auto& s : samples) {
    if (!fs::exists(s.image_path)) missing.push_back(s.image_path.string());
  }
  if (!missing.empty()) {
    std::string msg = "missing images:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }
  const embed::EmbeddingProvider provider(cfg.provider);
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.descriptive_prompt) throw DataError("sample " + s.image_id + " has no descriptive prompt (run gen-desc)");
    PreparedSample p{s, io::decode_image(s.image_path), provider.encode_pair(*s.descriptive_prompt, s.image_id),
                     provider.encode_pair(s.prompt, s.image_id)};
    out.push_back(std::move(p));
  }
  return out;
}

hvs::HvsWeightMap crop_hvs_weights(const io::RgbImage& crop, const RunConfig& cfg) {
  const auto side = cfg.model.grid_side();
  return hvs::hvs_weights(hvs::luminance(crop), {side, side, cfg.model.patch_size}, cfg.viewing);
}

std::uint64_t crop_seed(std::uint64_t root, const std::string& purpose, const std::string& image_id,
                        std::uint64_t epoch) {
  return derive_seed(derive_seed(root, purpose, fnv1a64(image_id)), "epoch", epoch);
}

std::vector<double> predict_crops(const PreparedSample& s, const model::ModelParams& params, const RunConfig& cfg,
                                  std::size_t n_crops, std::uint64_t seed) {
  NoGradGuard no_grad;
  const auto sci = model::compute_sci(s.descriptive, s.original, params, cfg.model);
  std::vector<double> scores;
  for (const auto& crop : io::sample_crops(s.image, n_crops, cfg.model.crop_size, seed)) {
    const auto score =
        model::predict_with_sci(sci, crop, s.original, crop_hvs_weights(crop, cfg), params, cfg.model);
    scores.push_back(score.item());
  }
  return scores;
}

double predict_sample(const PreparedSample& s, const model::ModelParams& params, const RunConfig& cfg) {
  const auto scores = predict_crops(s, params, cfg, cfg.eval_crops, crop_seed(cfg.seed, "eval-crops", s.sample.image_id));
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

std::string EpochLog::to_json() const {
  return json{{"epoch", epoch},
              {"lr", lr},
              {"train_loss", train_loss},
              {"val_srcc", val.srcc},
              {"val_plcc", val.plcc},
              {"val_main_score", val.main_score},
              {"improved", improved}}
      .dump();
}

namespace {

metrics::MetricReport validation_report(const std::vector<PreparedSample>& val, const model::ModelParams& params,
                                        const RunConfig& cfg) {
  std::vector<double> pred, gt;
  for (const auto& s : val) {
    pred.push_back(predict_sample(s, params, cfg));
    gt.push_back(s.sample.mos);
  }
  try {
    return metrics::evaluate(pred, gt);
  } catch (const UndefinedMetricError&) {
    // Constant predictions carry no ranking; score them as uncorrelated.
    return {0.0, 0.0, 0.0, pred.size()};
  }
}

// Loss of one sample: mean Smooth-L1 over its training crops.
Tensor sample_loss(const PreparedSample& s, const model::ModelParams& params, const RunConfig& cfg, int epoch) {
  const auto sci = model::compute_sci(s.descriptive, s.original, params, cfg.model);
  const auto crops = io::sample_crops(s.image, cfg.train_crops, cfg.model.crop_size,
                                      crop_seed(cfg.seed, "train-crops", s.sample.image_id, epoch));
  std::vector<Tensor> preds;
  for (const auto& crop : crops) {
    preds.push_back(model::predict_with_sci(sci, crop, s.original, crop_hvs_weights(crop, cfg), params, cfg.model));
  }
  const std::vector<double> target(preds.size(), s.sample.mos);
  return smooth_l1_loss(concat(std::span<const Tensor>(preds)), target, cfg.beta);
}

}  // namespace

TrainResult train(const RunConfig& cfg, const std::vector<io::Sample>& samples, const fs::path& out_dir,
                  std::ostream* log) {
  cfg.validate();
  for (const auto& s : samples) {
    if (!s.descriptive_prompt) throw DataError("sample " + s.image_id + " has no descriptive prompt (run gen-desc)");
  }
  auto [train_raw, val_raw] = io::split_dataset(samples, {cfg.train_fraction, cfg.seed});
  if (train_raw.empty() || val_raw.empty()) throw DataError("train/validation split left an empty side");
  fs::create_directories(out_dir);
  io::write_manifest(out_dir / "train_manifest.jsonl", train_raw);
  io::write_manifest(out_dir / "val_manifest.jsonl", val_raw);

  const auto mos_map = io::MosNormalizer::fit(train_raw);
  const auto train_set = prepare(io::normalize_mos(train_raw, mos_map), cfg);
  const auto val_set = prepare(io::normalize_mos(val_raw, mos_map), cfg);

  auto params = model::ModelParams::init(cfg.model, cfg.seed);
  auto trainable = params.trainable(cfg.model);
  if (cfg.model.freeze_backbone) {
    for (auto& nt : params.named()) {
      if (nt.name.starts_with("vit.")) nt.tensor.set_requires_grad(false);
    }
  }
  OptimizerState opt_state;

  TrainResult result;
  result.train_split = train_raw;
  result.val_split = val_raw;
  std::ofstream log_file(out_dir / "train_log.jsonl", std::ios::trunc);
  const auto ckpt_path = out_dir / "checkpoint.bin";
  bool have_best = false;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = lr_at(cfg.schedule, epoch);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng order_rng(derive_seed(cfg.seed, "epoch-order", static_cast<std::uint64_t>(epoch)));
    order_rng.shuffle(order.begin(), order.end());

    double loss_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      for (auto& p : trainable) p.zero_grad();
      std::vector<Tensor> losses;
      for (std::size_t i = start; i < end; ++i) losses.push_back(sample_loss(train_set[order[i]], params, cfg, epoch));
      const auto batch_loss = mean_pool(concat(std::span<const Tensor>(losses)), 0);
      if (!std::isfinite(batch_loss.item())) {
        throw DataError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                        std::to_string(start));
      }
      backward(batch_loss);
      adamw_step(trainable, opt_state, lr, cfg.optimizer);
      for (const auto& l : losses) loss_total += l.item();
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.train_loss = loss_total / static_cast<double>(train_set.size());
    entry.val = validation_report(val_set, params, cfg);
    entry.improved = !have_best || entry.val.main_score > result.best.best.main_score;
    if (entry.improved) {
      have_best = true;
      since_best = 0;
      result.best = Checkpoint{params.clone(), cfg, mos_map, entry.val, epoch};
      save_checkpoint(ckpt_path, result.best);
    } else {
      ++since_best;
    }
    const auto line = entry.to_json();
    log_file << line << '\n' << std::flush;
    if (log) *log << line << std::endl;
    result.log.push_back(entry);
    if (since_best >= cfg.early_stop_patience) break;
  }
  return result;
}

EvalResult evaluate(const Checkpoint& ckpt, const std::vector<io::Sample>& samples,
                    const std::optional<RunConfig>& override_cfg) {
  const RunConfig& cfg = override_cfg ? *override_cfg : ckpt.config;
  cfg.validate();
  const auto prepared = prepare(samples, cfg);
  EvalResult out;
  std::vector<double> gt;
  for (const auto& s : prepared) {
    out.predictions.push_back(ckpt.mos.denormalize(predict_sample(s, ckpt.params, cfg)));
    gt.push_back(s.sample.mos);
  }
  out.report = metrics::evaluate(out.predictions, gt);
  return out;
}

ScoreResult score_image(const Checkpoint& ckpt, const RunConfig& cfg, const fs::path& image,
                        const std::string& prompt, const std::optional<std::string>& descriptive,
                        const std::optional<std::string>& image_id) {
  cfg.validate();
  io::Sample s;
  s.image_path = image;
  s.prompt = prompt;
  s.image_id = image_id.value_or(image.stem().string());
  if (descriptive) {
    s.descriptive_prompt = descriptive;
  } else {
    if (cfg.provider.mode == embed::ProviderMode::FileStore) {
      throw UsageError("no --p_d given and the file-store provider cannot generate one; pass --p_d or use "
                       "--provider_mode deterministic/remote");
    }
    embed::DescriptionProvider describer(cfg.provider, {cfg.directive});
    s.descriptive_prompt = describer.describe(s);
  }
  // Descriptions can come from a remote provider while features stay local.
  RunConfig feature_cfg = cfg;
  if (feature_cfg.provider.mode == embed::ProviderMode::Remote) feature_cfg.provider.mode = embed::ProviderMode::Deterministic;
  const auto prepared = prepare({s}, feature_cfg);
  const auto normalized =
      predict_crops(prepared[0], ckpt.params, cfg, cfg.eval_crops, crop_seed(cfg.seed, "eval-crops", s.image_id));
  ScoreResult r;
  for (double v : normalized) r.crop_scores.push_back(ckpt.mos.denormalize(v));
  // Same value as evaluate(): mean on the normalized scale, then de-normalized.
  r.score = ckpt.mos.denormalize(std::accumulate(normalized.begin(), normalized.end(), 0.0) /
                                 static_cast<double>(normalized.size()));
  return r;
}

GenDescResult generate_descriptions(const std::vector<io::Sample>& samples, const RunConfig& cfg) {
  embed::DescriptionProvider describer(cfg.provider, {cfg.directive});
  GenDescResult out;
  out.samples = samples;
  for (auto& s : out.samples) {
    if (s.descriptive_prompt) continue;
    try {
      s.descriptive_prompt = describer.describe(s);
    } catch (const std::exception& e) {
      out.failures.emplace_back(s.image_id, e.what());
    }
  }
  return out;
}

HvsVisualization visualize_hvs(const io::RgbImage& image, std::size_t patch_size, const hvs::ViewingConfig& viewing) {
  const auto padded = io::pad_edge(image, patch_size, patch_size);
  const hvs::PatchGrid grid{padded.height / patch_size, padded.width / patch_size, patch_size};
  grid.validate();
  const auto region = io::crop(padded, 0, 0, grid.cols * patch_size, grid.rows * patch_size);
  HvsVisualization v;
  v.map = hvs::hvs_weights(hvs::luminance(region), grid, viewing);
  v.heatmap = hvs::render_weight_heatmap(v.map);
  return v;
}

std::string weight_table(const hvs::HvsWeightMap& map) {
  std::string out = "row col weight\n";
  char buf[96];
  for (std::size_t i = 0; i < map.weights.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu %zu %.17g\n", i / map.grid.cols, i % map.grid.cols, map.weights[i]);
    out += buf;
  }
  return out;
}

}  // namespace scagiqa::harness
