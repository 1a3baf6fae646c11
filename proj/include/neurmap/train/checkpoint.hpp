#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "neurmap/diff/adam.hpp"
#include "neurmap/nets/networks.hpp"
#include "neurmap/train/config.hpp"

namespace neurmap::train {

/// Everything a run needs to continue bit-exactly.
struct TrainState {
  TrainConfig config;
  nets::NetParams<float> d, m, n;
  diff::AdamState<float> adam_d, adam_m, adam_n;
  std::int64_t step = 0;
  std::mt19937_64 rng;

  /// Freshly initialized networks and optimizers for `config`.
  static TrainState initial(const TrainConfig& config);
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Checkpoint layout, all little-endian:
//   "NMCK" u32 version
//   u32 record count, then per tensor: u32+bytes name ("D/stem.w"), u32 rank,
//     u32 extents, f32 payload
//   per network D, M, N: u32+bytes tag, u64 Adam t, u32 count, then m and v
//     payloads in parameter order
//   u64 step, u32+bytes RNG state, u32+bytes config text
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const TrainState& state);
TrainState deserialize_checkpoint(const std::string& bytes);

/// Loads only the networks, for inference.
struct InferenceNets {
  TrainConfig config;
  nets::NetParams<float> d, m;
};
InferenceNets load_networks(const std::filesystem::path& path);

}  // namespace neurmap::train
