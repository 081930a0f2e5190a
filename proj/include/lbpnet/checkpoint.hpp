#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lbpnet/network.hpp"

namespace lbpnet {

// "LBPN" file: magic, u16 version, then sections
//   CONF  network config as JSON text
//   SEED  u64 seed + generator name
//   PATT  per block: u32 patterns, u32 points, then (dx, dy) f64 pairs
//   PARM  named f64 blobs (conv + head, BN running moments included)
// and a trailing CRC-32. Projection tables are rebuilt from the seed.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Network& net);
Network deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace lbpnet
