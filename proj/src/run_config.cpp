#include "scagiqa/run_config.hpp"

#include <fstream>

#include "scagiqa/errors.hpp"

namespace scagiqa {

using nlohmann::json;

void RunConfig::validate() const {
  model.validate();
  schedule.validate();
  provider.validate();
  if (provider.dim != model.dim) throw UsageError("provider dim must equal model dim");
  if (!(viewing.max_frequency_cpd > 0)) throw UsageError("max_frequency_cpd must be positive");
  if (directive.empty()) throw UsageError("directive must be non-empty");
  if (batch_size == 0 || train_crops == 0 || eval_crops == 0) throw UsageError("batch and crop counts must be positive");
  if (max_epochs <= 0 || early_stop_patience <= 0) throw UsageError("epoch limits must be positive");
  if (early_stop_patience > max_epochs) throw UsageError("early_stop_patience must not exceed max_epochs");
  if (!(beta > 0)) throw UsageError("beta must be positive");
  if (!(train_fraction > 0 && train_fraction < 1)) throw UsageError("train_fraction must lie in (0,1)");
}

json RunConfig::to_json() const {
  json j;
  j["dim"] = model.dim;
  j["vit_depth"] = model.vit_depth;
  j["heads"] = model.heads;
  j["crop_size"] = model.crop_size;
  j["patch_size"] = model.patch_size;
  j["n_experts"] = model.n_experts;
  j["top_k"] = model.top_k;
  j["expert_hidden"] = model.expert_hidden;
  j["tsam_residual"] = model.tsam_residual;
  j["preference_residual"] = model.preference_residual;
  j["freeze_backbone"] = model.freeze_backbone;
  j["disable_sci"] = model.disable_sci;
  j["base_lr"] = schedule.base_lr;
  j["warmup_start_lr"] = schedule.warmup_start_lr;
  j["warmup_epochs"] = schedule.warmup_epochs;
  j["decay_factor"] = schedule.decay_factor;
  j["decay_every_epochs"] = schedule.decay_every_epochs;
  j["adam_beta1"] = optimizer.beta1;
  j["adam_beta2"] = optimizer.beta2;
  j["adam_eps"] = optimizer.eps;
  j["weight_decay"] = optimizer.weight_decay;
  j["provider_mode"] = embed::to_string(provider.mode);
  j["store_path"] = provider.store_path ? json(provider.store_path->string()) : json(nullptr);
  j["endpoint_url"] = provider.endpoint_url ? json(*provider.endpoint_url) : json(nullptr);
  j["cache_dir"] = provider.cache_dir.string();
  j["remote_model"] = provider.model;
  j["timeout_seconds"] = provider.timeout_seconds;
  j["retries"] = provider.retries;
  j["n_tokens"] = provider.n_tokens;
  j["max_frequency_cpd"] = viewing.max_frequency_cpd;
  j["dc_excluded"] = viewing.dc_excluded;
  j["directive"] = directive;
  j["batch_size"] = batch_size;
  j["train_crops"] = train_crops;
  j["eval_crops"] = eval_crops;
  j["max_epochs"] = max_epochs;
  j["early_stop_patience"] = early_stop_patience;
  j["seed"] = seed;
  j["beta"] = beta;
  j["train_fraction"] = train_fraction;
  return j;
}

namespace {

template <class T>
T as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key \"" + key + "\" has the wrong type");
  }
}

void assign(RunConfig& c, const std::string& key, const json& v) {
  if (key == "dim") { c.model.dim = as<std::size_t>(v, key); c.provider.dim = c.model.dim; }
  else if (key == "vit_depth") c.model.vit_depth = as<std::size_t>(v, key);
  else if (key == "heads") c.model.heads = as<std::size_t>(v, key);
  else if (key == "crop_size") c.model.crop_size = as<std::size_t>(v, key);
  else if (key == "patch_size") c.model.patch_size = as<std::size_t>(v, key);
  else if (key == "n_experts") c.model.n_experts = as<std::size_t>(v, key);
  else if (key == "top_k") c.model.top_k = as<std::size_t>(v, key);
  else if (key == "expert_hidden") c.model.expert_hidden = as<std::size_t>(v, key);
  else if (key == "tsam_residual") c.model.tsam_residual = as<bool>(v, key);
  else if (key == "preference_residual") c.model.preference_residual = as<bool>(v, key);
  else if (key == "freeze_backbone") c.model.freeze_backbone = as<bool>(v, key);
  else if (key == "disable_sci") c.model.disable_sci = as<bool>(v, key);
  else if (key == "base_lr") c.schedule.base_lr = as<double>(v, key);
  else if (key == "warmup_start_lr") c.schedule.warmup_start_lr = as<double>(v, key);
  else if (key == "warmup_epochs") c.schedule.warmup_epochs = as<int>(v, key);
  else if (key == "decay_factor") c.schedule.decay_factor = as<double>(v, key);
  else if (key == "decay_every_epochs") c.schedule.decay_every_epochs = as<int>(v, key);
  else if (key == "adam_beta1") c.optimizer.beta1 = as<double>(v, key);
  else if (key == "adam_beta2") c.optimizer.beta2 = as<double>(v, key);
  else if (key == "adam_eps") c.optimizer.eps = as<double>(v, key);
  else if (key == "weight_decay") c.optimizer.weight_decay = as<double>(v, key);
  else if (key == "provider_mode") c.provider.mode = embed::parse_provider_mode(as<std::string>(v, key));
  else if (key == "store_path") {
    if (v.is_null()) c.provider.store_path.reset(); else c.provider.store_path = as<std::string>(v, key);
  } else if (key == "endpoint_url") {
    if (v.is_null()) c.provider.endpoint_url.reset(); else c.provider.endpoint_url = as<std::string>(v, key);
  } else if (key == "cache_dir") c.provider.cache_dir = as<std::string>(v, key);
  else if (key == "remote_model") c.provider.model = as<std::string>(v, key);
  else if (key == "timeout_seconds") c.provider.timeout_seconds = as<int>(v, key);
  else if (key == "retries") c.provider.retries = as<int>(v, key);
  else if (key == "n_tokens") c.provider.n_tokens = as<std::size_t>(v, key);
  else if (key == "max_frequency_cpd") c.viewing.max_frequency_cpd = as<double>(v, key);
  else if (key == "dc_excluded") c.viewing.dc_excluded = as<bool>(v, key);
  else if (key == "directive") c.directive = as<std::string>(v, key);
  else if (key == "batch_size") c.batch_size = as<std::size_t>(v, key);
  else if (key == "train_crops") c.train_crops = as<std::size_t>(v, key);
  else if (key == "eval_crops") c.eval_crops = as<std::size_t>(v, key);
  else if (key == "max_epochs") c.max_epochs = as<int>(v, key);
  else if (key == "early_stop_patience") c.early_stop_patience = as<int>(v, key);
  else if (key == "seed") c.seed = as<std::uint64_t>(v, key);
  else if (key == "beta") c.beta = as<double>(v, key);
  else if (key == "train_fraction") c.train_fraction = as<double>(v, key);
  else throw UsageError("unknown config key \"" + key + "\"");
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) assign(c, key, value);
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const json current = to_json();
  if (!current.contains(key)) throw UsageError("unknown option --" + key);
  const json& slot = current[key];
  json parsed;
  if (slot.is_string() || key == "store_path" || key == "endpoint_url") {
    parsed = value;
  } else if (slot.is_boolean()) {
    if (value == "true" || value == "1") parsed = true;
    else if (value == "false" || value == "0") parsed = false;
    else throw UsageError("--" + key + " expects true/false");
  } else {
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      throw UsageError("--" + key + " expects a number, got \"" + value + "\"");
    }
    if (!parsed.is_number()) throw UsageError("--" + key + " expects a number, got \"" + value + "\"");
  }
  assign(*this, key, parsed);
}

RunConfig desk_run_config() {
  RunConfig c;
  c.model.dim = 32;
  c.model.vit_depth = 4;
  c.model.heads = 4;
  c.model.crop_size = 64;
  c.model.patch_size = 16;
  c.model.n_experts = 4;
  c.model.top_k = 3;
  c.model.expert_hidden = 64;
  c.provider.dim = 32;
  c.provider.n_tokens = 32;
  c.schedule.base_lr = 1e-3;
  c.schedule.warmup_start_lr = 2e-4;
  c.schedule.warmup_epochs = 3;
  c.schedule.decay_factor = 0.5;
  c.schedule.decay_every_epochs = 6;
  c.batch_size = 12;
  c.train_crops = 3;
  c.eval_crops = 15;
  c.max_epochs = 20;
  c.early_stop_patience = 10;
  c.seed = 7;
  return c;
}

}  // namespace scagiqa
