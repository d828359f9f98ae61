#include "scagiqa/embed.hpp"

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "scagiqa/errors.hpp"
#include "scagiqa/raster.hpp"
#include "scagiqa/rng.hpp"
#include "scagiqa/tensor_file.hpp"

namespace scagiqa::embed {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string to_hex(std::string_view bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(kDigits[c >> 4]);
    out.push_back(kDigits[c & 0xf]);
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw ProviderError("sha256 failed", false);
  }
  return to_hex(std::string_view(reinterpret_cast<const char*>(md.data()), len));
}

std::string base64(std::string_view data) {
  std::string out(4 * ((data.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(data.data()), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw UsageError("endpoint_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// Write to a unique temporary name, then rename over the target.
void atomic_write(const fs::path& target, const std::string& content) {
  static std::atomic<std::uint64_t> counter{0};
  std::ostringstream tmp_name;
  tmp_name << target.filename().string() << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id())
           << '.' << counter.fetch_add(1);
  const fs::path tmp = target.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ProviderError("cache write failed: cannot create " + tmp.string(), false);
    out << content;
    if (!out) throw ProviderError("cache write failed: " + tmp.string(), false);
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ProviderError("cache write failed: cannot rename into " + target.string(), false);
  }
}

}  // namespace

ProviderMode parse_provider_mode(const std::string& name) {
  if (name == "file-store") return ProviderMode::FileStore;
  if (name == "deterministic") return ProviderMode::Deterministic;
  if (name == "remote") return ProviderMode::Remote;
  throw UsageError("unknown provider mode \"" + name + "\" (file-store, deterministic, remote)");
}

std::string to_string(ProviderMode mode) {
  switch (mode) {
    case ProviderMode::FileStore: return "file-store";
    case ProviderMode::Deterministic: return "deterministic";
    case ProviderMode::Remote: return "remote";
  }
  return "unknown";
}

void ProviderConfig::validate() const {
  if (mode == ProviderMode::FileStore && !store_path) throw UsageError("file-store provider requires store_path");
  if (mode == ProviderMode::Remote && !endpoint_url) throw UsageError("remote provider requires endpoint_url");
  if (n_tokens == 0 || dim == 0) throw UsageError("provider n_tokens and dim must be positive");
  if (retries < 0 || timeout_seconds <= 0) throw UsageError("provider retries/timeout out of range");
}

std::string store_key_hex(const std::string& prompt, const std::string& image_id) {
  const std::uint64_t h = fnv1a64(prompt);
  std::string be(8, '\0');
  for (int i = 0; i < 8; ++i) be[i] = static_cast<char>((h >> (56 - 8 * i)) & 0xff);
  return to_hex(be) + to_hex(image_id);
}

MultimodalFeatures deterministic_features(const std::string& prompt, const std::string& image_id,
                                          std::size_t n_tokens, std::size_t dim) {
  std::string key = prompt;
  key.push_back('\0');
  key += image_id;
  std::uint64_t state = fnv1a64(key);
  std::vector<double> values(n_tokens * dim);
  for (auto& v : values) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    v = 2.0 * (static_cast<double>(state >> 11) * 0x1.0p-53) - 1.0;
  }
  for (std::size_t t = 0; t < n_tokens; ++t) {
    double norm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) norm += values[t * dim + d] * values[t * dim + d];
    norm = std::sqrt(norm);
    if (norm > 0) {
      for (std::size_t d = 0; d < dim; ++d) values[t * dim + d] /= norm;
    }
  }
  return {Tensor::from({n_tokens, dim}, std::move(values))};
}

void write_store_entry(const fs::path& store, const std::string& prompt, const std::string& image_id,
                       const MultimodalFeatures& features) {
  fs::create_directories(store);
  io::write_tensor(store / store_key_hex(prompt, image_id), features.tokens);
}

EmbeddingProvider::EmbeddingProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

MultimodalFeatures EmbeddingProvider::encode_pair(const std::string& prompt, const std::string& image_id) const {
  if (prompt.empty()) throw ProviderError("encode_pair: empty prompt for image " + image_id, false);
  switch (cfg_.mode) {
    case ProviderMode::Deterministic:
      return deterministic_features(prompt, image_id, cfg_.n_tokens, cfg_.dim);
    case ProviderMode::FileStore: {
      const auto key = store_key_hex(prompt, image_id);
      const auto file = *cfg_.store_path / key;
      if (!fs::exists(file)) {
        throw DataError("embedding store has no entry for key " + key + " (image " + image_id + ")");
      }
      MultimodalFeatures f{io::read_tensor(file)};
      if (f.tokens.ndim() != 2 || f.dim() != cfg_.dim) {
        throw DataError("embedding " + key + " has shape " + shape_str(f.tokens.dims()) + ", expected [N x " +
                        std::to_string(cfg_.dim) + "]");
      }
      return f;
    }
    case ProviderMode::Remote:
      break;
  }
  throw ProviderError("encode_pair is local only; remote mode is not supported for encoding", false);
}

std::string fixture_description(const std::string& image_id) {
  static constexpr std::array<const char*, 8> kSubjects = {"a weathered lighthouse", "a red cube", "two cats",
                                                           "a mountain lake", "a vintage car", "a bowl of fruit",
                                                           "a city street", "an astronaut"};
  static constexpr std::array<const char*, 6> kStyles = {"soft watercolor", "sharp photorealistic detail",
                                                         "flat vector art", "moody oil painting",
                                                         "high-contrast digital render", "pastel illustration"};
  static constexpr std::array<const char*, 5> kViews = {"from a low angle", "in a wide shot", "in close-up",
                                                        "from above", "at eye level"};
  const auto h = fnv1a64(image_id);
  return std::string(kSubjects[h % kSubjects.size()]) + " rendered in " + kStyles[(h >> 8) % kStyles.size()] + ", " +
         kViews[(h >> 16) % kViews.size()];
}

DescriptionProvider::DescriptionProvider(ProviderConfig cfg, DescriptiveDirective directive)
    : cfg_(std::move(cfg)), directive_(std::move(directive)) {
  cfg_.validate();
  if (directive_.text.empty()) throw UsageError("descriptive directive must be non-empty");
}

fs::path DescriptionProvider::cache_path(const std::string& image_bytes) const {
  return cfg_.cache_dir / (sha256_hex(image_bytes + directive_.text) + ".txt");
}

std::string DescriptionProvider::describe(const io::Sample& sample) {
  switch (cfg_.mode) {
    case ProviderMode::FileStore:
      if (!sample.descriptive_prompt) {
        throw ProviderError("file-store provider: manifest has no p_d for " + sample.image_id, false);
      }
      return *sample.descriptive_prompt;
    case ProviderMode::Deterministic:
      return fixture_description(sample.image_id);
    case ProviderMode::Remote:
      return describe_remote(sample.image_path);
  }
  throw ProviderError("unknown provider mode", false);
}

std::string DescriptionProvider::describe_remote(const fs::path& image_path) {
  std::string bytes;
  {
    const auto raw = io::read_file(image_path);
    bytes.assign(raw.begin(), raw.end());
  }
  const auto cached = cache_path(bytes);
  if (fs::exists(cached)) {
    std::ifstream in(cached, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  const auto& url = *cfg_.endpoint_url;
  const auto ep = split_url(url);
  const std::string body =
      json{{"directive", directive_.text}, {"image_b64", base64(bytes)}, {"model", cfg_.model}}.dump();

  std::string description;
  for (int attempt = 0;; ++attempt) {
    httplib::Client client(ep.origin);
    client.set_connection_timeout(cfg_.timeout_seconds, 0);
    client.set_read_timeout(cfg_.timeout_seconds, 0);
    ++remote_requests_;
    auto res = client.Post(ep.path, body, "application/json");
    if (!res) {
      if (attempt < cfg_.retries) continue;
      throw ProviderError("request to " + url + " failed: " + httplib::to_string(res.error()), true, url, 0);
    }
    if (res->status != 200) {
      const bool retriable = res->status >= 500 || res->status == 429;
      if (retriable && attempt < cfg_.retries) continue;
      throw ProviderError("endpoint " + url + " returned HTTP " + std::to_string(res->status), retriable, url,
                          res->status);
    }
    try {
      const auto reply = json::parse(res->body);
      if (!reply.is_object() || !reply.contains("description") || !reply["description"].is_string()) {
        throw ProviderError("malformed response from " + url + ": missing string \"description\"", false, url,
                            res->status);
      }
      description = reply["description"].get<std::string>();
    } catch (const json::exception& e) {
      throw ProviderError("malformed response from " + url + ": " + e.what(), false, url, res->status);
    }
    break;
  }

  std::error_code ec;
  fs::create_directories(cfg_.cache_dir, ec);
  if (ec) throw ProviderError("cache write failed: cannot create " + cfg_.cache_dir.string(), false);
  atomic_write(cached, description);
  return description;
}

}  // namespace scagiqa::embed
