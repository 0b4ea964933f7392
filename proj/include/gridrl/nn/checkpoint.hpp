#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>

#include "gridrl/nn/policy.hpp"

namespace gridrl::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'G', 'R', 'L', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t schema_hash = 0;
  std::int64_t step = 0;
  std::uint64_t parameter_count = 0;
};

/// Layout: magic[8], u32 version, u64 schema hash, i64 step, u64 count,
/// then count little-endian f64 values.
void save_checkpoint(const std::filesystem::path& path, const PolicyNetwork& net, std::int64_t step);
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);
/// Loads parameters into net and returns the stored step. Refuses files
/// whose schema hash or parameter count differ from net's.
std::int64_t load_checkpoint(const std::filesystem::path& path, PolicyNetwork& net);

}  // namespace gridrl::nn
