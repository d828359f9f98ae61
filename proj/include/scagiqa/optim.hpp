#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scagiqa/tensor.hpp"

namespace scagiqa {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

/// First/second moment buffers, one per parameter, plus the step counter.
struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;
};

/// One AdamW step with decoupled weight decay. Moment buffers are created on
/// the first call. Throws ShapeError when a parameter has no gradient buffer.
void adamw_step(std::span<Tensor> params, OptimizerState& state, double lr,
                const AdamWConfig& cfg = {});

/// Linear warmup followed by step decay, evaluated per epoch.
struct LrSchedule {
  double base_lr = 1.0e-5;
  double warmup_start_lr = 2.0e-6;
  int warmup_epochs = 3;
  double decay_factor = 0.1;
  int decay_every_epochs = 3;

  /// Throws UsageError when the fields break their invariants.
  void validate() const;
};

double lr_at(const LrSchedule& schedule, int epoch);

}  // namespace scagiqa
