#include "scagiqa/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>

#include "scagiqa/dataset.hpp"
#include "scagiqa/errors.hpp"
#include "scagiqa/run_config.hpp"

namespace scagiqa::synth {

namespace fs = std::filesystem;
using nlohmann::json;

double synthetic_mos(double match, double amplitude) {
  return std::clamp(0.6 * match + 0.4 * (1.0 - amplitude), 0.0, 1.0);
}

namespace {

struct Wave {
  int kx, ky;
  double phase;
  double weight;
};

constexpr double kNoiseScale = 0.18;
constexpr int kNoiseWaves = 32;

void normalize_rows(std::vector<double>& v, std::size_t rows, std::size_t dim) {
  for (std::size_t r = 0; r < rows; ++r) {
    double n = 0.0;
    for (std::size_t d = 0; d < dim; ++d) n += v[r * dim + d] * v[r * dim + d];
    n = std::sqrt(n);
    for (std::size_t d = 0; d < dim; ++d) v[r * dim + d] /= n;
  }
}

std::string make_prompt(Rng& rng) {
  static constexpr std::array<const char*, 10> kAdj = {"serene", "neon", "ancient", "tiny", "golden",
                                                       "misty", "crystal", "rusty", "vivid", "quiet"};
  static constexpr std::array<const char*, 10> kNoun = {"fox", "castle", "robot", "garden", "harbor",
                                                        "violin", "desert", "train", "owl", "lantern"};
  static constexpr std::array<const char*, 6> kStyle = {"oil painting", "studio photo", "pixel art",
                                                        "ink sketch", "3d render", "anime still"};
  return std::string("a ") + kAdj[rng.below(kAdj.size())] + " " + kNoun[rng.below(kNoun.size())] + ", " +
         kStyle[rng.below(kStyle.size())];
}

std::string make_description(Rng& rng, const std::string& image_id) {
  static constexpr std::array<const char*, 6> kTone = {"warm", "cool", "muted", "saturated", "soft", "grainy"};
  static constexpr std::array<const char*, 5> kLayout = {"centered subject", "wide landscape", "close-up detail",
                                                         "diagonal composition", "symmetric frame"};
  return std::string("The image (") + image_id + ") shows a " + kTone[rng.below(kTone.size())] + " scene with a " +
         kLayout[rng.below(kLayout.size())];
}

}  // namespace

io::RgbImage render_image(std::size_t size, double amplitude, Rng& rng) {
  const double two_pi_over_n = 2.0 * std::numbers::pi / static_cast<double>(size);
  std::array<std::vector<Wave>, 3> background;
  for (auto& channel : background) {
    for (int i = 0; i < 3; ++i) {
      int kx, ky;
      do {
        kx = static_cast<int>(rng.below(2 * kBackgroundMaxFrequency + 1)) - kBackgroundMaxFrequency;
        ky = static_cast<int>(rng.below(kBackgroundMaxFrequency + 1));
      } while ((kx == 0 && ky == 0) || kx * kx + ky * ky > kBackgroundMaxFrequency * kBackgroundMaxFrequency);
      channel.push_back({kx, ky, rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(0.04, 0.1)});
    }
  }
  std::vector<Wave> noise;
  const int kmax = static_cast<int>(kNoiseBandHigh);
  while (static_cast<int>(noise.size()) < kNoiseWaves) {
    const int kx = static_cast<int>(rng.below(2 * kmax + 1)) - kmax;
    const int ky = static_cast<int>(rng.below(kmax + 1));
    const double r = std::hypot(kx, ky);
    if (r < kNoiseBandLow || r > kNoiseBandHigh) continue;
    noise.push_back({kx, ky, rng.uniform(0.0, 2.0 * std::numbers::pi), 1.0});
  }
  const double noise_gain = amplitude * kNoiseScale / std::sqrt(kNoiseWaves / 2.0);
  const std::array<double, 3> base = {rng.uniform(0.35, 0.65), rng.uniform(0.35, 0.65), rng.uniform(0.35, 0.65)};

  io::RgbImage img(size, size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      double n = 0.0;
      for (const auto& w : noise) n += std::cos(two_pi_over_n * (w.kx * double(x) + w.ky * double(y)) + w.phase);
      n *= noise_gain;
      for (std::size_t c = 0; c < 3; ++c) {
        double v = base[c] + n;
        for (const auto& w : background[c]) {
          v += w.weight * std::cos(two_pi_over_n * (w.kx * double(x) + w.ky * double(y)) + w.phase);
        }
        img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
  }
  return img;
}

PlantedFeatures planted_features(const std::string& prompt, const std::string& descriptive,
                                 const std::string& image_id, double match, std::size_t n_tokens, std::size_t dim,
                                 Rng& rng) {
  const auto axis_t = embed::deterministic_features("consistency-axis", "", 1, dim).tokens;
  const auto axis = axis_t.data();

  auto po = embed::deterministic_features(prompt, image_id, n_tokens, dim).tokens.detach();
  auto po_v = po.mutable_data();
  std::vector<int> polarity(n_tokens);
  for (std::size_t j = 0; j < n_tokens; ++j) polarity[j] = j < n_tokens / 2 ? 1 : -1;
  rng.shuffle(polarity.begin(), polarity.end());
  std::vector<std::size_t> positive, negative;
  for (std::size_t j = 0; j < n_tokens; ++j) {
    double proj = 0.0;
    for (std::size_t d = 0; d < dim; ++d) proj += po_v[j * dim + d] * axis[d];
    double norm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      po_v[j * dim + d] -= proj * axis[d];
      norm += po_v[j * dim + d] * po_v[j * dim + d];
    }
    norm = std::sqrt(norm);
    for (std::size_t d = 0; d < dim; ++d) po_v[j * dim + d] = po_v[j * dim + d] / norm + polarity[j] * axis[d];
    (polarity[j] > 0 ? positive : negative).push_back(j);
  }
  std::vector<double> po_vals(po_v.begin(), po_v.end());
  normalize_rows(po_vals, n_tokens, dim);

  const auto jitter = embed::deterministic_features(descriptive, image_id, n_tokens, dim).tokens;
  const auto n_pos = static_cast<std::size_t>(std::lround(std::clamp(match, 0.0, 1.0) * double(n_tokens)));
  std::vector<double> pd_vals(n_tokens * dim);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    const auto& pool = (i < n_pos || negative.empty()) ? positive : negative;
    const auto j = pool[rng.below(pool.size())];
    for (std::size_t d = 0; d < dim; ++d) pd_vals[i * dim + d] = po_vals[j * dim + d] + 0.5 * jitter.at(i, d);
  }
  normalize_rows(pd_vals, n_tokens, dim);
  std::vector<std::size_t> rows(n_tokens);
  for (std::size_t i = 0; i < n_tokens; ++i) rows[i] = i;
  rng.shuffle(rows.begin(), rows.end());
  std::vector<double> shuffled(n_tokens * dim);
  for (std::size_t i = 0; i < n_tokens; ++i)
    std::copy_n(pd_vals.begin() + rows[i] * dim, dim, shuffled.begin() + i * dim);

  return {{Tensor::from({n_tokens, dim}, std::move(po_vals))}, {Tensor::from({n_tokens, dim}, std::move(shuffled))}};
}

std::vector<SynthFactors> synthesize(const SynthOptions& opts) {
  if (opts.n < 10) throw UsageError("synth needs n >= 10");
  std::error_code ec;
  fs::create_directories(opts.out_dir / "images", ec);
  if (ec) throw DataError("cannot create " + (opts.out_dir / "images").string() + ": " + ec.message());
  const auto store = opts.out_dir / "embeddings";
  fs::create_directories(store, ec);
  if (ec) throw DataError("cannot create " + store.string() + ": " + ec.message());

  Rng rng(derive_seed(opts.seed, "synth"));
  std::vector<io::Sample> samples;
  std::vector<SynthFactors> factors;
  for (std::size_t i = 0; i < opts.n; ++i) {
    char id_buf[32];
    std::snprintf(id_buf, sizeof id_buf, "synth_%04zu", i);
    const std::string id = id_buf;
    const double match = rng.uniform();
    const double amplitude = rng.uniform();
    const auto image = render_image(opts.image_size, amplitude, rng);
    const auto image_path = opts.out_dir / "images" / (id + ".ppm");
    io::write_ppm(image_path, image);

    io::Sample s;
    s.image_path = image_path;
    s.image_id = id;
    s.prompt = make_prompt(rng);
    s.descriptive_prompt = make_description(rng, id);
    s.mos = synthetic_mos(match, amplitude);
    const auto planted = planted_features(s.prompt, *s.descriptive_prompt, id, match, opts.n_tokens, opts.dim, rng);
    embed::write_store_entry(store, s.prompt, id, planted.original);
    embed::write_store_entry(store, *s.descriptive_prompt, id, planted.descriptive);
    samples.push_back(std::move(s));
    factors.push_back({id, match, amplitude, samples.back().mos});
  }
  io::write_manifest(opts.out_dir / "manifest.jsonl", samples);

  std::ofstream fout(opts.out_dir / "factors.jsonl", std::ios::trunc);
  for (const auto& f : factors) {
    fout << json{{"id", f.image_id}, {"match", f.match}, {"amplitude", f.amplitude}, {"mos", f.mos}}.dump() << '\n';
  }

  auto cfg = desk_run_config();
  cfg.model.dim = opts.dim;
  cfg.provider.dim = opts.dim;
  cfg.provider.n_tokens = opts.n_tokens;
  cfg.provider.mode = embed::ProviderMode::FileStore;
  cfg.provider.store_path = fs::absolute(store).lexically_normal();
  cfg.provider.cache_dir = fs::absolute(opts.out_dir / "cache").lexically_normal();
  std::ofstream cout_cfg(opts.out_dir / "config.json", std::ios::trunc);
  cout_cfg << cfg.to_json().dump(2) << '\n';
  if (!cout_cfg || !fout) throw DataError("cannot write synth outputs under " + opts.out_dir.string());
  return factors;
}

}  // namespace scagiqa::synth
