// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: scagiqa_acceptance [criterion numbers...]

#include <sys/wait.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "grad_check.hpp"
#include "oracles.hpp"
#include "scagiqa/fft.hpp"
#include "scagiqa/harness.hpp"
#include "scagiqa/hvs.hpp"
#include "scagiqa/metrics.hpp"
#include "scagiqa/model.hpp"
#include "scagiqa/optim.hpp"
#include "scagiqa/synth.hpp"
#include "temp_dir.hpp"

using namespace scagiqa;
using namespace scagiqa::model;
using scagiqa::testing::grad_check;
using scagiqa::testing::probe;
using scagiqa::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

io::RgbImage random_crop(std::size_t size, Rng& rng) {
  io::RgbImage img(size, size);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

// ---- 1: gradients ---------------------------------------------------------

Outcome gradient_suite() {
  constexpr double kOpTol = 1e-4;
  constexpr double kModelTol = 1e-3;
  const auto t0 = std::chrono::steady_clock::now();

  Rng rng(11);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 5}, rng);
  auto c = random_tensor({3, 4}, rng);
  auto row = random_tensor({4}, rng);
  auto col = random_tensor({3}, rng);
  auto gamma = random_tensor({4}, rng);
  auto beta = random_tensor({4}, rng);
  auto s = Tensor::from({1}, {1.7}, true);
  const std::vector<std::size_t> idx = {3, 0, 3, 2};
  const std::vector<double> target = {0.1, -0.4, 2.5, 0.0, 0.3, -1.2, 0.7, 1.9, -2.2, 0.05, 0.6, 0.0};

  // Model components on a small configuration.
  ModelConfig mc;
  mc.dim = 8;
  mc.heads = 2;
  mc.crop_size = 16;
  mc.patch_size = 8;
  mc.expert_hidden = 8;
  auto mp = ModelParams::init(mc, 3);
  const embed::MultimodalFeatures pd{random_tensor({5, 8}, rng, 1.0, false)};
  const embed::MultimodalFeatures po{random_tensor({6, 8}, rng, 1.0, false)};
  auto feats = random_tensor({4, 8}, rng);
  auto sv = random_tensor({8}, rng);
  auto vv = random_tensor({8}, rng);
  auto ws = random_tensor({4, 1}, rng);
  auto wc = random_tensor({8}, rng);
  std::vector<Tensor> levels;
  for (int i = 0; i < 4; ++i) levels.push_back(random_tensor({4, 8}, rng));
  const hvs::HvsWeightMap wh{{0.6, 0.55, 0.9, 0.7}, {2, 2, 8}};
  const auto crop = random_crop(16, rng);
  const auto& att = mp.tsam;

  struct Case {
    const char* name;
    std::function<Tensor()> fn;
    std::vector<Tensor> inputs;
  };
  const std::vector<Case> cases = {
      {"matmul", [&] { return probe(matmul(a, b)); }, {a, b}},
      {"transpose", [&] { return probe(transpose(a)); }, {a}},
      {"reshape", [&] { return probe(reshape(a, {2, 6})); }, {a}},
      {"add", [&] { return probe(add(a, c)); }, {a, c}},
      {"sub", [&] { return probe(sub(a, c)); }, {a, c}},
      {"mul", [&] { return probe(mul(a, c)); }, {a, c}},
      {"scale", [&] { return probe(scale(a, -2.5)); }, {a}},
      {"add_scalar", [&] { return probe(add_scalar(a, 0.7)); }, {a}},
      {"add_row", [&] { return probe(add_row(a, row)); }, {a, row}},
      {"mul_row", [&] { return probe(mul_row(a, row)); }, {a, row}},
      {"mul_col", [&] { return probe(mul_col(a, col)); }, {a, col}},
      {"sigmoid", [&] { return probe(sigmoid(scale(a, 3.0))); }, {a}},
      {"gelu", [&] { return probe(gelu(scale(a, 2.0))); }, {a}},
      {"softmax", [&] { return probe(softmax(scale(a, 2.0), 1)); }, {a}},
      {"softmax axis 0", [&] { return probe(softmax(scale(a, 2.0), 0)); }, {a}},
      {"mean_pool", [&] { return probe(mean_pool(a, 0)); }, {a}},
      {"mean_pool axis 1", [&] { return probe(mean_pool(a, 1)); }, {a}},
      {"sum", [&] { return scale(sum(mul(a, a)), 0.5); }, {a}},
      {"layer_norm", [&] { return probe(layer_norm(a, gamma, beta)); }, {a, gamma, beta}},
      {"concat", [&] { return probe(concat({a, c, a})); }, {a, c}},
      {"slice_cols", [&] { return probe(slice_cols(b, 1, 3)); }, {b}},
      {"gather", [&] { return probe(gather(row, idx)); }, {row}},
      {"div_scalar", [&] { return probe(div_scalar(a, s)); }, {a, s}},
      {"smooth_l1_loss", [&] { return smooth_l1_loss(reshape(scale(a, 2.0), {12}), target, 1.0); }, {a}},
      {"cross_attention",
       [&] { return probe(compute_sci(pd, po, mp, mc)); },
       {att.query.weight, att.key.weight, att.value.weight, att.output.weight, att.output.bias}},
      {"multi-level fusion", [&] { return probe(fuse_multilevel(levels, mp)); }, {levels[0], levels[2], mp.multilevel_fusion.weight}},
      {"preference fusion", [&] { return probe(fuse_preference(feats, po, mp, mc)); }, {feats, mp.pref_query.weight, mp.pref_out.weight}},
      {"spatial weights", [&] { return probe(spatial_weights(feats, mp)); }, {feats, mp.spatial.weight}},
      {"channel weights", [&] { return probe(channel_weights(feats, mp)); }, {feats, mp.channel.weight}},
      {"quality-aware pooling", [&] { return probe(aqafp_pool(feats, ws, wc, wh)); }, {feats, ws, wc}},
      {"expert mixture",
       [&] { return moer_predict(sv, vv, mp, mc).score; },
       {sv, vv, mp.gate.weight, mp.experts[0].fc1.weight, mp.experts[1].fc2.weight}},
      {"patch transformer", [&] { return probe(vit_forward(crop, mp, mc).back()); }, {mp.patch_embed.weight, mp.blocks[2].fc1.weight, mp.blocks[0].attn.query.weight}},
  };

  double worst_op = 0.0;
  std::string worst_name;
  for (const auto& tc : cases) {
    const auto r = grad_check(tc.fn, tc.inputs);
    if (r.max_rel_error > worst_op || worst_name.empty()) {
      worst_op = r.max_rel_error;
      worst_name = tc.name;
    }
  }

  // End-to-end on the desk model, 1% of parameters.
  const auto desk = desk_run_config().model;
  const auto params = ModelParams::init(desk, 5);
  Rng drng(21);
  const auto dcrop = random_crop(desk.crop_size, drng);
  const embed::MultimodalFeatures dpd{random_tensor({32, desk.dim}, drng, 1.0, false)};
  const embed::MultimodalFeatures dpo{random_tensor({32, desk.dim}, drng, 1.0, false)};
  const auto side = desk.grid_side();
  const auto dwh = hvs::hvs_weights(hvs::luminance(dcrop), {side, side, desk.patch_size}, {});
  const auto e2e = grad_check([&] { return model_forward(dcrop, dpd, dpo, dwh, params, desk); },
                              params.trainable(desk), 0.01, 17);

  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst_op < kOpTol && e2e.max_rel_error < kModelTol && secs < 60.0;
  o.detail = std::to_string(cases.size()) + " ops, worst " + fmt("%.2e", worst_op) + " (" + worst_name +
             "); end-to-end " + fmt("%.2e", e2e.max_rel_error) + " over " + std::to_string(e2e.checked) +
             " params; " + fmt("%.1f s", secs);
  return o;
}

// ---- 2: FFT ---------------------------------------------------------------

Outcome fft_oracle() {
  constexpr std::size_t S = 16;
  Rng rng(2);
  double max_err = 0.0, max_parseval = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(S * S);
    for (auto& v : x) v = rng.uniform();
    const auto fast = hvs::fft2(x, S);
    const auto slow = testing::naive_dft2(x, S);
    double space = 0.0, freq = 0.0;
    for (std::size_t i = 0; i < S * S; ++i) {
      max_err = std::max(max_err, std::abs(fast[i] - slow[i]));
      space += x[i] * x[i];
      freq += std::norm(fast[i]);
    }
    max_parseval = std::max(max_parseval, std::abs(space - freq / (S * S)));
  }
  return {max_err < 1e-9 && max_parseval < 1e-9,
          "max |fft - dft| " + fmt("%.2e", max_err) + ", Parseval " + fmt("%.2e", max_parseval)};
}

// ---- 3: CSF ---------------------------------------------------------------

Outcome csf_values() {
  const double a0 = hvs::csf(0.0), a8 = hvs::csf(8.0), a30 = hvs::csf(30.0);
  return {std::abs(a0 - 0.04992) <= 1e-6 && std::abs(a8 - 0.9809) <= 1e-3 && std::abs(a30 - 0.187) <= 1e-3,
          "A(0)=" + fmt("%.6f", a0) + " A(8)=" + fmt("%.4f", a8) + " A(30)=" + fmt("%.4f", a30)};
}

// ---- 4: metrics -----------------------------------------------------------

Outcome metric_oracle() {
  Rng rng(1234);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    const bool ties = trial % 2 == 0;
    std::vector<double> x(n), y(n);
    for (auto* v : {&x, &y})
      for (auto& e : *v) e = ties ? static_cast<double>(rng.below(6)) : rng.normal();
    x[0] = -1.0;
    x[1] = 9.0;
    y[0] = 9.0;
    y[n - 1] = -1.0;
    if (n == 2) y[1] = 0.0;
    worst = std::max(worst, std::abs(metrics::srcc(x, y) - testing::brute_force_spearman(x, y)));
    worst = std::max(worst, std::abs(metrics::plcc(x, y) - testing::direct_pearson(x, y)));
  }
  const double ms = metrics::main_score(0.9051, 0.9558);
  const bool rounds = std::round(ms * 1e4) / 1e4 == 0.9305;
  return {worst < 1e-12 && std::abs(ms - 0.93045) < 1e-12 && rounds,
          "max oracle diff " + fmt("%.2e", worst) + ", main_score " + fmt("%.5f", ms)};
}

// ---- 5: expert mixture ----------------------------------------------------

Outcome moe_properties() {
  ModelConfig mc;
  mc.dim = 8;
  mc.heads = 2;
  mc.expert_hidden = 8;
  Rng rng(5);
  double worst_sum = 0.0, worst_perm = 0.0;
  bool positive = true;
  for (int trial = 0; trial < 200; ++trial) {
    auto p = ModelParams::init(mc, 100 + trial);
    const auto s = random_tensor({8}, rng, 2.0, false);
    const auto v = random_tensor({8}, rng, 2.0, false);
    const auto out = moer_predict(s, v, p, mc);
    double total = 0.0;
    for (double w : out.selected_weights.data()) {
      positive = positive && w > 0.0;
      total += w;
    }
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));

    std::vector<std::size_t> perm = {0, 1, 2, 3};
    for (std::size_t i = 3; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    auto q = p.clone();
    const auto source = p.clone();
    const auto in = p.gate.weight.dim(0);
    for (std::size_t e = 0; e < 4; ++e) {
      q.experts[e] = source.experts[perm[e]];
      q.gate.bias.mutable_data()[e] = p.gate.bias.at(perm[e]);
      for (std::size_t r = 0; r < in; ++r) q.gate.weight.mutable_data()[r * 4 + e] = p.gate.weight.at(r, perm[e]);
    }
    worst_perm = std::max(worst_perm, std::abs(moer_predict(s, v, q, mc).score.item() - out.score.item()));
  }

  auto p = ModelParams::init(mc, 1);
  for (auto& w : p.gate.weight.mutable_data()) w = 0.0;
  for (auto& w : p.gate.bias.mutable_data()) w = 0.0;
  const auto s = random_tensor({8}, rng, 1.0, false);
  const auto first = moer_predict(s, s, p, mc);
  bool ties = first.selected == std::vector<std::size_t>{0, 1, 2};
  for (int i = 0; i < 10; ++i) {
    const auto again = moer_predict(s, s, p, mc);
    ties = ties && again.selected == first.selected && again.score.item() == first.score.item();
  }
  return {positive && worst_sum <= 1e-12 && worst_perm <= 1e-12 && ties,
          "max |sum-1| " + fmt("%.1e", worst_sum) + ", max permutation diff " + fmt("%.1e", worst_perm) +
              ", equal logits pick {0,1,2}: " + (ties ? "yes" : "no")};
}

// ---- 6: pooling -----------------------------------------------------------

Outcome pooling_reductions() {
  Rng rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = 1 + rng.below(16), d = 1 + rng.below(12);
    const auto f = random_tensor({p, d}, rng, 3.0, false);
    const double sw = rng.uniform(), cw = rng.uniform(), hw = rng.uniform();
    const hvs::HvsWeightMap wh{std::vector<double>(p, hw), {1, p, 16}};
    const auto v = aqafp_pool(f, Tensor::full({p, 1}, sw), Tensor::full({d}, cw), wh);
    const auto mean = mean_pool(f, 0);
    for (std::size_t k = 0; k < d; ++k) worst = std::max(worst, std::abs(v.at(k) - sw * cw * mean.at(k)));
  }
  const auto hand = aqafp_pool(Tensor::from({2, 2}, {1, 0, 3, 0}), Tensor::from({2, 1}, {1, 1}),
                               Tensor::from({2}, {1, 1}), {{0.0, 1.0}, {1, 2, 16}});
  const bool exact = hand.at(0) == 7.0 / 3.0 && hand.at(1) == 0.0;
  return {worst <= 1e-12 && exact,
          "constant-weight max diff " + fmt("%.1e", worst) + ", hand case " + fmt("%.17g", hand.at(0))};
}

// ---- 7: schedule ----------------------------------------------------------

Outcome schedule_values() {
  const LrSchedule s;
  const double got[] = {lr_at(s, 0), lr_at(s, 3), lr_at(s, 6), lr_at(s, 9)};
  const bool ok = got[0] == 2e-6 && got[1] == 1e-5 && got[2] == 1e-6 && got[3] == 1e-7;
  std::string d;
  for (double g : got) d += fmt("%.17g ", g);
  return {ok, d};
}

// ---- 8 and 9: end-to-end --------------------------------------------------

struct PipelineRun {
  std::vector<std::string> log_lines;
  metrics::MetricReport holdout;
};

PipelineRun train_and_eval(const RunConfig& cfg, const std::vector<io::Sample>& samples, const fs::path& out) {
  const auto result = harness::train(cfg, samples, out);
  PipelineRun run;
  for (const auto& e : result.log) run.log_lines.push_back(e.to_json());
  run.holdout = harness::evaluate(load_checkpoint(out / "checkpoint.bin"), io::load_manifest(out / "val_manifest.jsonl")).report;
  return run;
}

class EndToEnd {
 public:
  Outcome learnability() {
    const auto t0 = std::chrono::steady_clock::now();
    synth::SynthOptions opts;
    opts.out_dir = dir_ / "synth";
    opts.n = 512;
    opts.seed = 7;
    synth::synthesize(opts);
    cfg_ = RunConfig::load((dir_ / "synth/config.json").string());
    samples_ = io::load_manifest(dir_ / "synth/manifest.jsonl");
    main_ = train_and_eval(cfg_, samples_, dir_ / "run_a");
    const double pipeline_secs = seconds_since(t0);

    auto ablated = cfg_;
    ablated.model.disable_sci = true;
    const auto abl = train_and_eval(ablated, samples_, dir_ / "ablation");
    const double total_secs = seconds_since(t0);

    const double drop = main_.holdout.srcc - abl.holdout.srcc;
    Outcome o;
    o.pass = main_.holdout.srcc >= 0.85 && main_.holdout.main_score >= 0.85 && drop >= 0.05 && total_secs < 600.0;
    o.detail = "holdout SRCC " + fmt("%.4f", main_.holdout.srcc) + " Main " + fmt("%.4f", main_.holdout.main_score) +
               " (" + std::to_string(main_.log_lines.size()) + " epochs, " + fmt("%.0f s", pipeline_secs) +
               "); without SCI SRCC " + fmt("%.4f", abl.holdout.srcc) + ", drop " + fmt("%.4f", drop) + "; total " +
               fmt("%.0f s", total_secs);
    return o;
  }

  Outcome determinism() {
    if (main_.log_lines.empty()) learnability();
    const auto again = train_and_eval(cfg_, samples_, dir_ / "run_b");
    const bool logs = again.log_lines == main_.log_lines;
    const bool report = again.holdout.srcc == main_.holdout.srcc && again.holdout.plcc == main_.holdout.plcc &&
                        again.holdout.main_score == main_.holdout.main_score && again.holdout.n == main_.holdout.n;
    std::ifstream ca(dir_ / "run_a/checkpoint.bin", std::ios::binary), cb(dir_ / "run_b/checkpoint.bin", std::ios::binary);
    const bool ckpt = std::string(std::istreambuf_iterator<char>(ca), {}) == std::string(std::istreambuf_iterator<char>(cb), {});
    return {logs && report && ckpt, std::string("epoch logs ") + (logs ? "identical" : "differ") + ", final report " +
                                        (report ? "identical" : "differs") + ", checkpoints " +
                                        (ckpt ? "identical" : "differ")};
  }

 private:
  testing::TempDir dir_{"scagiqa-acceptance"};
  RunConfig cfg_;
  std::vector<io::Sample> samples_;
  PipelineRun main_;
};

// ---- 10: visualization ----------------------------------------------------

int run_cli(const std::string& args) {
  const int status = std::system((std::string(SCAGIQA_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome visualization() {
  testing::TempDir dir;
  constexpr std::size_t S = 128;
  io::RgbImage half(S, S), flat(S, S);
  std::fill(flat.pixels.begin(), flat.pixels.end(), std::uint8_t{100});
  Rng rng(10);
  for (std::size_t y = 0; y < S; ++y)
    for (std::size_t x = 0; x < S; ++x) {
      const auto v = x >= S / 2 ? static_cast<std::uint8_t>(rng.below(256)) : std::uint8_t{100};
      for (std::size_t c = 0; c < 3; ++c) half.at(x, y, c) = v;
    }
  io::write_ppm(dir / "half.ppm", half);
  io::write_ppm(dir / "flat.ppm", flat);
  const std::string tail = " --table " + (dir / "t.txt").string();
  if (run_cli("viz-hvs --image " + (dir / "half.ppm").string() + " --out " + (dir / "half.pgm").string() + tail) != 0 ||
      run_cli("viz-hvs --image " + (dir / "flat.ppm").string() + " --out " + (dir / "flat.pgm").string() + tail) != 0) {
    return {false, "viz-hvs failed"};
  }
  const auto h = io::decode_image(dir / "half.pgm");
  const auto f = io::decode_image(dir / "flat.pgm");
  double flat_side = 0.0, noise_side = 0.0;
  for (std::size_t y = 0; y < h.height; ++y)
    for (std::size_t x = 0; x < h.width; ++x) (x < h.width / 2 ? flat_side : noise_side) += h.at(x, y, 0);
  const double n = static_cast<double>(h.width / 2 * h.height);
  bool uniform = true;
  for (auto p : f.pixels) uniform = uniform && p == 128;
  return {noise_side / n > flat_side / n && uniform,
          "mean intensity noise " + fmt("%.1f", noise_side / n) + " vs flat " + fmt("%.1f", flat_side / n) +
              "; flat image uniform 128: " + (uniform ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("criteria", only, "Criterion numbers to run (default: all)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());

  EndToEnd e2e;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"FFT oracle", fft_oracle},
      {"CSF golden values", csf_values},
      {"metric oracle", metric_oracle},
      {"expert mixture properties", moe_properties},
      {"pooling reductions", pooling_reductions},
      {"learning-rate schedule", schedule_values},
      {"end-to-end learnability", [&] { return e2e.learnability(); }},
      {"determinism", [&] { return e2e.determinism(); }},
      {"HVS visualization", visualization},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << o.detail << "  ["
              << fmt("%.1f s", seconds_since(t0)) << "]" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
