#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dlen/model.hpp"

namespace dlen {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (all integers u32 little-endian, values f32 little-endian):
//   "DLEN" | version | config | param_count | params...
//   config: width seb_width ilb_blocks[3] ilb_heads[3] seb_blocks[4] seb_heads[4]
//           refine_blocks ffn_expansion use_lwn use_seab train_height train_width
//   param:  name_len name[name_len] rank extents[rank] values[numel]
template <typename T>
std::vector<std::uint8_t> serialize_checkpoint(DlenModel<T>& model);

// Rejects bad magic, version, truncation, or a parameter table that does not match the
// stored config, before any model is returned.
template <typename T>
DlenModel<T> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

template <typename T>
void save_checkpoint(DlenModel<T>& model, const std::filesystem::path& path);

template <typename T>
DlenModel<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace dlen
