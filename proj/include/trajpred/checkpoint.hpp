#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "trajpred/model.hpp"

namespace trajpred {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serialises to the little-endian container described in docs/checkpoint_format.md.
std::string encode_checkpoint(const ModelParams& params);

/// Throws ChecksumError for truncated/corrupt data, UnsupportedVersion for a
/// different format version and ModelShapeError for inconsistent tensors.
ModelParams decode_checkpoint(const std::string& bytes);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace trajpred
