#include "mvsd/checkpoint.hpp"

#include <fmt/format.h>

#include <set>
#include <stdexcept>

#include "mvsd/binio.hpp"

namespace mvsd {

namespace {
constexpr std::string_view kMagic = "MVSDCKPT";
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& file) {
  bin::Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  w.str(ck.config_text);
  w.u64(ck.tensors.size());
  for (const auto& [name, t] : ck.tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.tensor(t);
  }
  bin::write_file(file, w.buffer());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  const std::string data = bin::read_file(file);
  bin::Reader r(data, "checkpoint " + file.string());
  std::string magic(kMagic.size(), '\0');
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw DataError(file.string() + " is not a checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError(fmt::format("{}: checkpoint version {} is not supported (expected {})", file.string(), version,
                                kCheckpointVersion));
  }
  Checkpoint ck;
  ck.config_text = r.str();
  const std::uint64_t count = r.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint32_t len = r.u32();
    std::string name(len, '\0');
    r.bytes(name.data(), len);
    ck.tensors.emplace_back(std::move(name), r.tensor());
  }
  if (r.remaining() != 0) throw DataError(file.string() + ": trailing bytes after checkpoint payload");
  return ck;
}

Checkpoint make_checkpoint(const MvsdModel& model, std::string config_text) {
  Checkpoint ck;
  ck.config_text = std::move(config_text);
  for (const Parameter* p : model.parameters()) ck.tensors.emplace_back(p->name, p->value);
  return ck;
}

void load_weights(MvsdModel& model, const Checkpoint& ck) {
  const auto params = model.parameters();
  if (params.size() != ck.tensors.size()) {
    throw DataError(fmt::format("checkpoint holds {} tensors, model expects {}", ck.tensors.size(), params.size()));
  }
  std::set<std::string> seen;
  for (const auto& [name, t] : ck.tensors) {
    if (!seen.insert(name).second) throw DataError("checkpoint repeats tensor '" + name + "'");
    const Parameter* p = model.find(name);
    if (!p) throw DataError("checkpoint tensor '" + name + "' has no matching parameter");
    if (p->value.shape() != t.shape()) {
      throw DataError(fmt::format("tensor '{}' has shape {}, parameter expects {}", name, shape_str(t.shape()),
                                  shape_str(p->value.shape())));
    }
  }
  for (const auto& [name, t] : ck.tensors) model.param(name).value = t;
}

}  // namespace mvsd
