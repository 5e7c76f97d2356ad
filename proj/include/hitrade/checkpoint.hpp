#pragma once

#include "hitrade/network.hpp"
#include "hitrade/ppo.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hitrade {

// A trained (or in-training) policy with the configuration that produced it.
struct Checkpoint {
    std::string role; // "1m", "10m", "1h" or "allocator"; at most 15 bytes
    PpoHyperparams hyperparams;
    std::uint64_t seed = 0;
    PolicyParameters params;

    bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (all integers and floats little-endian):
//   "HTCKPT\0\0" | u32 version | char[16] role | u64 x4 network spec |
//   u64 total_timesteps, n_steps, batch_size, n_epochs |
//   f64 learning_rate, gamma, gae_lambda, clip_range, entropy_coef, value_coef, max_grad_norm |
//   u64 seed | u64 update_count | u64 parameter_count |
//   f64[parameter_count] x3 (values, adam_m, adam_v) | u64 FNV-1a of everything before it
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes, std::string_view source);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws CheckpointError mentioning `path` on any I/O or format problem.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace hitrade
