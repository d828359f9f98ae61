#pragma once

// Sources for descriptive prompts and (prompt, image) feature sequences.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "scagiqa/dataset.hpp"
#include "scagiqa/tensor.hpp"

namespace scagiqa::embed {

/// Token-sequence embedding of a (prompt, image) pair, tokens [N x D].
struct MultimodalFeatures {
  Tensor tokens;

  std::size_t n_tokens() const { return tokens.dim(0); }
  std::size_t dim() const { return tokens.dim(1); }
};

inline constexpr const char* kDefaultDirective =
    "Describe this image in one detailed paragraph: the main subjects, their attributes and "
    "arrangement, the setting, and the aesthetics (style, lighting, color palette, camera angle).";

struct DescriptiveDirective {
  std::string text = kDefaultDirective;
};

enum class ProviderMode { FileStore, Deterministic, Remote };

ProviderMode parse_provider_mode(const std::string& name);
std::string to_string(ProviderMode mode);

struct ProviderConfig {
  ProviderMode mode = ProviderMode::Deterministic;
  std::optional<std::filesystem::path> store_path;
  std::optional<std::string> endpoint_url;
  std::filesystem::path cache_dir = ".scagiqa-cache";
  std::string model = "default";
  int timeout_seconds = 30;
  int retries = 2;
  std::size_t n_tokens = 32;
  std::size_t dim = 64;

  /// Throws UsageError when mode-specific fields are missing.
  void validate() const;
};

/// Embedding-store key: hex(FNV-1a64(prompt)) followed by hex(image_id bytes).
std::string store_key_hex(const std::string& prompt, const std::string& image_id);

/// Pseudo-embedding seeded by FNV-1a64(prompt NUL image_id): a 64-bit LCG
/// stream mapped to [-1, 1], each token scaled to unit norm.
MultimodalFeatures deterministic_features(const std::string& prompt, const std::string& image_id,
                                          std::size_t n_tokens, std::size_t dim);

void write_store_entry(const std::filesystem::path& store, const std::string& prompt, const std::string& image_id,
                       const MultimodalFeatures& features);

class EmbeddingProvider {
 public:
  explicit EmbeddingProvider(ProviderConfig cfg);

  /// Feature sequence for (prompt, image_id). Throws ProviderError for remote
  /// mode and DataError naming the key when a store entry is missing.
  MultimodalFeatures encode_pair(const std::string& prompt, const std::string& image_id) const;

  const ProviderConfig& config() const { return cfg_; }

 private:
  ProviderConfig cfg_;
};

/// Stable offline description for an image id.
std::string fixture_description(const std::string& image_id);

class DescriptionProvider {
 public:
  DescriptionProvider(ProviderConfig cfg, DescriptiveDirective directive);

  /// P_d for a sample. File-store mode returns the manifest field, deterministic
  /// mode a fixture, remote mode queries the endpoint through the on-disk cache.
  std::string describe(const io::Sample& sample);

  /// Number of HTTP requests issued so far (cache hits excluded).
  std::size_t remote_requests() const { return remote_requests_.load(); }

  /// Cache file for the given image bytes under this provider's directive.
  std::filesystem::path cache_path(const std::string& image_bytes) const;

 private:
  std::string describe_remote(const std::filesystem::path& image_path);

  ProviderConfig cfg_;
  DescriptiveDirective directive_;
  std::atomic<std::size_t> remote_requests_{0};
};

}  // namespace scagiqa::embed
