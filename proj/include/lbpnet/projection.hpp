#pragma once

#include <cstdint>
#include <vector>

#include "lbpnet/random.hpp"

namespace lbpnet {

/// Fixed random bit-source map: bit i of output channel o compares inside
/// input channel `source(o, i)`. Shared by every pixel of the output channel
/// and never trained; it is regenerated from (seed, shape) when a model loads.
struct ProjectionTable {
    std::uint64_t seed = 0;
    std::uint64_t stream = streams::kProjection;
    int in_channels = 0;
    int out_channels = 0;
    int n_bits = 0;
    std::vector<std::uint32_t> entries;  // out_channels * n_bits, row per output channel

    std::uint32_t source(int out_channel, int bit) const noexcept {
        return entries[static_cast<std::size_t>(out_channel) * n_bits + bit];
    }
    friend bool operator==(const ProjectionTable&, const ProjectionTable&) = default;
};

/// Each entry uniform over [0, in_channels). Pure in (seed, stream, shape).
ProjectionTable build_projection(std::uint64_t seed, int in_channels, int n_bits, int out_channels,
                                 std::uint64_t stream = streams::kProjection);

/// Throws ShapeError if the table does not fit a layer with this input
/// channel count, `out_channels` patterns and `n_bits` points each.
void check_projection(const ProjectionTable& table, int in_channels, int out_channels, int n_bits);

}  // namespace lbpnet
