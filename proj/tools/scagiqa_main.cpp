// scagiqa: command-line front end.
//
//   scagiqa synth    --out DIR [--n 512] [--seed 7]
//   scagiqa gen-desc --manifest M --out M2 [--config C] [--key value ...]
//   scagiqa train    --manifest M --out DIR [--config C] [--key value ...]
//   scagiqa eval     --checkpoint CK --manifest M [--key value ...]
//   scagiqa score    --checkpoint CK --image IMG --prompt TEXT [--p_d TEXT] [--key value ...]
//   scagiqa viz-hvs  --image IMG --out PGM [--table TXT] [--key value ...]
//
// Exit codes: 0 success, 1 usage error, 2 data or provider error.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "scagiqa/checkpoint.hpp"
#include "scagiqa/errors.hpp"
#include "scagiqa/harness.hpp"
#include "scagiqa/run_config.hpp"
#include "scagiqa/synth.hpp"

namespace {

using namespace scagiqa;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

// Leftover arguments are `--key value` config overrides.
void apply_overrides(RunConfig& cfg, std::vector<std::string> extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& flag = extras[i];
    if (flag.rfind("--", 0) != 0 || flag.size() < 3) throw UsageError("unexpected argument: " + flag);
    auto key = flag.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw UsageError("missing value for --" + key);
      value = extras[++i];
    }
    for (auto& c : key) {
      if (c == '-') c = '_';
    }
    cfg.set(key, value);
  }
}

RunConfig base_config(const std::string& path) { return path.empty() ? desk_run_config() : RunConfig::load(path); }

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

json report_json(const metrics::MetricReport& r) { return json::parse(r.to_json()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt-aware quality assessment for generated images"};
  app.require_subcommand(1);

  std::string config_path, manifest, out, checkpoint, image, prompt, p_d, image_id, table;
  std::size_t synth_n = 512;
  std::uint64_t synth_seed = 7;
  std::size_t synth_size = 80;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--n", synth_n, "Number of samples");
  synth->add_option("--seed", synth_seed, "Root seed");
  synth->add_option("--image_size", synth_size, "Image side in pixels");

  auto* gen_desc = app.add_subcommand("gen-desc", "Fill missing descriptive prompts");
  gen_desc->add_option("--manifest", manifest)->required();
  gen_desc->add_option("--out", out, "Output manifest")->required();

  auto* train = app.add_subcommand("train", "Train and keep the best checkpoint");
  train->add_option("--manifest", manifest)->required();
  train->add_option("--out", out, "Run directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--manifest", manifest)->required();

  auto* score = app.add_subcommand("score", "Score one image");
  score->add_option("--checkpoint", checkpoint)->required();
  score->add_option("--image", image)->required();
  score->add_option("--prompt", prompt)->required();
  score->add_option("--p_d", p_d, "Descriptive prompt");
  score->add_option("--id", image_id, "Image id (defaults to the file stem)");

  auto* viz = app.add_subcommand("viz-hvs", "Render per-patch HVS weights");
  viz->add_option("--image", image)->required();
  viz->add_option("--out", out, "Heatmap PGM")->required();
  viz->add_option("--table", table, "Weight table path (stdout when absent)");

  for (auto* sub : {gen_desc, train, eval, score, viz}) {
    sub->add_option("--config", config_path, "Flat JSON run config");
    sub->allow_extras();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) {
      synth::SynthOptions opts;
      opts.out_dir = out;
      opts.n = synth_n;
      opts.seed = synth_seed;
      opts.image_size = synth_size;
      const auto factors = synth::synthesize(opts);
      print_json({{"out_dir", out},
                  {"n", factors.size()},
                  {"manifest", (std::filesystem::path(out) / "manifest.jsonl").string()},
                  {"config", (std::filesystem::path(out) / "config.json").string()}});
      return 0;
    }
    if (*gen_desc) {
      auto cfg = base_config(config_path);
      apply_overrides(cfg, gen_desc->remaining());
      const auto result = harness::generate_descriptions(io::load_manifest(manifest), cfg);
      io::write_manifest(out, result.samples);
      json failures = json::array();
      for (const auto& [id, msg] : result.failures) failures.push_back({{"id", id}, {"error", msg}});
      print_json({{"out", out}, {"samples", result.samples.size()}, {"failures", failures}});
      return result.failures.empty() ? 0 : kExitData;
    }
    if (*train) {
      auto cfg = base_config(config_path);
      apply_overrides(cfg, train->remaining());
      const auto result = harness::train(cfg, io::load_manifest(manifest), out, &std::cerr);
      print_json({{"checkpoint", (std::filesystem::path(out) / "checkpoint.bin").string()},
                  {"best_epoch", result.best.epoch},
                  {"epochs_run", result.log.size()},
                  {"best", report_json(result.best.best)}});
      return 0;
    }
    if (*eval) {
      const auto ckpt = load_checkpoint(checkpoint);
      auto cfg = ckpt.config;
      apply_overrides(cfg, eval->remaining());
      const auto result = harness::evaluate(ckpt, io::load_manifest(manifest), cfg);
      print_json(report_json(result.report));
      return 0;
    }
    if (*score) {
      const auto ckpt = load_checkpoint(checkpoint);
      auto cfg = ckpt.config;
      apply_overrides(cfg, score->remaining());
      const auto result =
          harness::score_image(ckpt, cfg, image, prompt, p_d.empty() ? std::nullopt : std::optional(p_d),
                               image_id.empty() ? std::nullopt : std::optional(image_id));
      print_json({{"score", result.score}, {"crop_scores", result.crop_scores}});
      return 0;
    }
    if (*viz) {
      auto cfg = base_config(config_path);
      apply_overrides(cfg, viz->remaining());
      const auto v = harness::visualize_hvs(io::decode_image(image), cfg.model.patch_size, cfg.viewing);
      io::write_pgm(out, v.heatmap);
      const auto text = harness::weight_table(v.map);
      if (table.empty()) {
        std::cout << text;
      } else {
        std::ofstream(table) << text;
      }
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
