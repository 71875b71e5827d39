#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mvsd/model.hpp"

namespace mvsd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config_text;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

/// Layout: "MVSDCKPT", u32 version, u64 config length + bytes, u64 tensor
/// count, then per tensor u32 name length + name, u32 rank, u64 dims, f64
/// payload. All integers and floats little-endian.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);

Checkpoint make_checkpoint(const MvsdModel& model, std::string config_text);
/// Copies tensors into the model; names and shapes must match exactly.
void load_weights(MvsdModel& model, const Checkpoint& ck);

}  // namespace mvsd
