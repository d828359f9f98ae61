#include "scagiqa/optim.hpp"

#include <cmath>
#include <string>

#include "scagiqa/errors.hpp"

namespace scagiqa {

void adamw_step(std::span<Tensor> params, OptimizerState& state, double lr, const AdamWConfig& cfg) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adamw_step: state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw ShapeError("adamw_step: parameter " + std::to_string(i) + " has no gradient");
    }
    if (state.m[i].size() != params[i].size()) throw ShapeError("adamw_step: moment shape mismatch");
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto g = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] -= lr * cfg.weight_decay * p[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void LrSchedule::validate() const {
  if (!(base_lr > 0) || !(warmup_start_lr > 0)) throw UsageError("learning rates must be positive");
  if (warmup_start_lr > base_lr) throw UsageError("warmup_start_lr must not exceed base_lr");
  if (warmup_epochs < 0) throw UsageError("warmup_epochs must be non-negative");
  if (!(decay_factor > 0 && decay_factor < 1)) throw UsageError("decay_factor must lie in (0,1)");
  if (decay_every_epochs <= 0) throw UsageError("decay_every_epochs must be positive");
}

double lr_at(const LrSchedule& s, int epoch) {
  if (epoch < s.warmup_epochs) {
    const double frac = static_cast<double>(epoch) / static_cast<double>(s.warmup_epochs);
    return s.warmup_start_lr + (s.base_lr - s.warmup_start_lr) * frac;
  }
  const int k = (epoch - s.warmup_epochs) / s.decay_every_epochs;
  if (k == 0) return s.base_lr;
  // Power-of-ten rates go through log space so they land on the correctly
  // rounded decimal (1e-5 * 0.1 * 0.1 would not).
  const double lb = std::log10(s.base_lr);
  const double ld = std::log10(s.decay_factor);
  if (lb == std::round(lb) && ld == std::round(ld)) return std::pow(10.0, lb + k * ld);
  return s.base_lr * std::pow(s.decay_factor, k);
}

}  // namespace scagiqa
