#include "scagiqa/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <unordered_set>

#include "scagiqa/errors.hpp"
#include "scagiqa/rng.hpp"

namespace scagiqa::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<Sample> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  std::vector<Sample> samples;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DataError(where + ": expected a JSON object");
    auto need_string = [&](const char* key) -> std::string {
      if (!obj.contains(key)) throw DataError(where + ": missing key \"" + key + "\"");
      if (!obj[key].is_string()) throw DataError(where + ": key \"" + key + "\" must be a string");
      return obj[key].get<std::string>();
    };
    Sample s;
    const fs::path image = need_string("image");
    s.image_path = image.is_absolute() ? image : (base / image).lexically_normal();
    s.prompt = need_string("prompt");
    if (!obj.contains("mos")) throw DataError(where + ": missing key \"mos\"");
    if (!obj["mos"].is_number()) throw DataError(where + ": key \"mos\" must be a number");
    s.mos = obj["mos"].get<double>();
    if (obj.contains("p_d") && !obj["p_d"].is_null()) s.descriptive_prompt = need_string("p_d");
    s.image_id = obj.contains("id") ? need_string("id") : image.stem().string();
    if (!ids.insert(s.image_id).second) throw DataError(where + ": duplicate id \"" + s.image_id + "\"");
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_manifest(const fs::path& path, std::span<const Sample> samples) {
  const fs::path base = fs::absolute(path).parent_path();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& s : samples) {
    fs::path image = fs::absolute(s.image_path).lexically_normal();
    const auto rel = image.lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") image = rel;
    json obj{{"id", s.image_id}, {"image", image.generic_string()}, {"prompt", s.prompt}, {"mos", s.mos}};
    if (s.descriptive_prompt) obj["p_d"] = *s.descriptive_prompt;
    out << obj.dump() << '\n';
  }
  if (!out) throw DataError("write failed for manifest " + path.string());
}

std::vector<RgbImage> sample_crops(const RgbImage& image, std::size_t count, std::size_t size, std::uint64_t seed) {
  if (count == 0) throw ShapeError("sample_crops: count must be positive");
  if (size == 0) throw ShapeError("sample_crops: size must be positive");
  const RgbImage padded = pad_edge(image, size, size);
  Rng rng(seed);
  std::vector<RgbImage> crops;
  crops.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto x = rng.below(padded.width - size + 1);
    const auto y = rng.below(padded.height - size + 1);
    crops.push_back(crop(padded, x, y, size, size));
  }
  return crops;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(std::span<const Sample> samples,
                                                                  const SplitSpec& spec) {
  if (samples.size() < 2) throw DataError("split_dataset: need at least 2 samples");
  if (!(spec.train_fraction > 0 && spec.train_fraction < 1)) throw UsageError("train_fraction must lie in (0,1)");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(spec.seed, "split"));
  rng.shuffle(order.begin(), order.end());
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(samples.size()) * spec.train_fraction));
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(samples[order[i]]);
  }
  return out;
}

MosNormalizer MosNormalizer::fit(std::span<const Sample> train) {
  if (train.empty()) throw DataError("cannot fit MOS normalization on an empty split");
  const auto [lo, hi] = std::minmax_element(train.begin(), train.end(),
                                            [](const Sample& a, const Sample& b) { return a.mos < b.mos; });
  if (lo->mos == hi->mos) throw DataError("MOS values are constant; normalization undefined");
  return {lo->mos, hi->mos};
}

std::vector<Sample> normalize_mos(std::span<const Sample> samples, const MosNormalizer& map) {
  std::vector<Sample> out(samples.begin(), samples.end());
  for (auto& s : out) s.mos = map.normalize(s.mos);
  return out;
}

std::vector<Sample> normalize_mos(std::span<const Sample> samples) {
  return normalize_mos(samples, MosNormalizer::fit(samples));
}

}  // namespace scagiqa::io
