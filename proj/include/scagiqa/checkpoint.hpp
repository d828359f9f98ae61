#pragma once

// Checkpoint file:
//   "SCAK" | u32 version | u64 header length | JSON header | one SCAT tensor record per parameter
// The header holds the run config, MOS normalization, best validation report,
// epoch and the ordered parameter names.

#include <filesystem>

#include "scagiqa/dataset.hpp"
#include "scagiqa/metrics.hpp"
#include "scagiqa/model.hpp"
#include "scagiqa/run_config.hpp"

namespace scagiqa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  model::ModelParams params;
  RunConfig config;
  io::MosNormalizer mos;
  metrics::MetricReport best;
  int epoch = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace scagiqa
