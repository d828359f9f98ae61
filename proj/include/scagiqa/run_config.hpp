#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "scagiqa/embed.hpp"
#include "scagiqa/hvs.hpp"
#include "scagiqa/model.hpp"
#include "scagiqa/optim.hpp"

namespace scagiqa {

/// Everything a train/eval/score run depends on. Serialized as one flat JSON
/// object; every key can be overridden from the command line.
struct RunConfig {
  model::ModelConfig model;
  LrSchedule schedule;
  AdamWConfig optimizer;
  embed::ProviderConfig provider;
  hvs::ViewingConfig viewing;
  std::string directive = embed::kDefaultDirective;
  std::size_t batch_size = 12;
  std::size_t train_crops = 3;
  std::size_t eval_crops = 15;
  int max_epochs = 100;
  int early_stop_patience = 10;
  std::uint64_t seed = 0;
  double beta = 1.0;
  double train_fraction = 0.8;

  void validate() const;

  nlohmann::json to_json() const;
  /// Unknown keys are a UsageError.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);

  /// Applies one `--key value` override, parsing value by the key's type.
  void set(const std::string& key, const std::string& value);
};

/// Small model and faster schedule for CPU-only training on synthetic data.
RunConfig desk_run_config();

}  // namespace scagiqa
