#pragma once

// Flat binary parameter checkpoints:
//   "ARSQCKPT" | u32 version | u64 count |
//   count x { u32 name_len | name bytes | u32 rank | rank x u64 dim | f64 data }
// All integers and floats little-endian.

#include "arsq/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace arsq {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

void save_checkpoint(const std::filesystem::path& path, std::span<const ad::Parameter* const> params);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

// Copies tensors into parameters by name. Throws if a parameter is missing
// from the file or its shape differs.
void load_checkpoint(const std::filesystem::path& path, std::span<ad::Parameter* const> params);

}  // namespace arsq
