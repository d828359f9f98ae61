#include "scagiqa/checkpoint.hpp"

#include <algorithm>
#include <cstring>

#include "scagiqa/errors.hpp"
#include "scagiqa/raster.hpp"
#include "scagiqa/tensor_file.hpp"

namespace scagiqa {

using nlohmann::json;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto named = ckpt.params.named();
  json header;
  header["config"] = ckpt.config.to_json();
  header["mos"] = {{"lo", ckpt.mos.lo}, {"hi", ckpt.mos.hi}};
  header["best"] = json::parse(ckpt.best.to_json());
  header["epoch"] = ckpt.epoch;
  header["parameters"] = json::array();
  for (const auto& nt : named) header["parameters"].push_back(nt.name);
  const std::string text = header.dump();

  std::vector<std::uint8_t> out{'S', 'C', 'A', 'K'};
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t len = text.size();
  out.resize(out.size() + sizeof version + sizeof len);
  std::memcpy(out.data() + 4, &version, sizeof version);
  std::memcpy(out.data() + 8, &len, sizeof len);
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& nt : named) {
    const auto rec = io::encode_tensor(nt.tensor);
    out.insert(out.end(), rec.begin(), rec.end());
  }
  io::write_file(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "SCAK", 4) != 0) {
    throw DataError(path.string() + " is not a checkpoint");
  }
  std::uint32_t version;
  std::uint64_t len;
  std::memcpy(&version, bytes.data() + 4, sizeof version);
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  if (bytes.size() - 16 < len) throw DataError("checkpoint header truncated");
  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.config = RunConfig::from_json(header.at("config"));
  ckpt.mos = {header.at("mos").at("lo").get<double>(), header.at("mos").at("hi").get<double>()};
  ckpt.best = metrics::MetricReport::from_json(header.at("best").dump());
  ckpt.epoch = header.at("epoch").get<int>();
  ckpt.params = model::ModelParams::init(ckpt.config.model, 0);

  const auto names = header.at("parameters").get<std::vector<std::string>>();
  auto named = ckpt.params.named();
  if (names.size() != named.size()) throw DataError("checkpoint parameter count does not match its config");
  std::size_t offset = 16 + len;
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (names[i] != named[i].name) {
      throw DataError("checkpoint parameter " + names[i] + " where " + named[i].name + " was expected");
    }
    const auto t = io::decode_tensor_at(bytes, offset);
    if (t.dims() != named[i].tensor.dims()) {
      throw DataError("checkpoint parameter " + names[i] + " has shape " + shape_str(t.dims()));
    }
    auto dst = named[i].tensor.mutable_data();
    std::copy(t.data().begin(), t.data().end(), dst.begin());
  }
  if (offset != bytes.size()) throw DataError("checkpoint has trailing bytes");
  return ckpt;
}

}  // namespace scagiqa
