#include "lbpnet/projection.hpp"

#include <string>

#include "lbpnet/errors.hpp"

namespace lbpnet {

ProjectionTable build_projection(std::uint64_t seed, int in_channels, int n_bits, int out_channels,
                                 std::uint64_t stream) {
    if (in_channels < 1) throw ConfigError("build_projection: need at least one input channel");
    if (n_bits < 1 || out_channels < 0) throw ConfigError("build_projection: bad table shape");

    ProjectionTable t;
    t.seed = seed;
    t.stream = stream;
    t.in_channels = in_channels;
    t.out_channels = out_channels;
    t.n_bits = n_bits;
    t.entries.resize(static_cast<std::size_t>(out_channels) * n_bits);
    CounterRng rng(seed, stream);
    for (auto& e : t.entries) {
        e = static_cast<std::uint32_t>(rng.uniform_index(static_cast<std::uint64_t>(in_channels)));
    }
    return t;
}

void check_projection(const ProjectionTable& table, int in_channels, int out_channels, int n_bits) {
    if (table.out_channels != out_channels || table.n_bits != n_bits ||
        table.entries.size() != static_cast<std::size_t>(out_channels) * n_bits) {
        throw ShapeError("projection table shape " + std::to_string(table.out_channels) + "x" +
                         std::to_string(table.n_bits) + " does not match layer " +
                         std::to_string(out_channels) + "x" + std::to_string(n_bits));
    }
    for (std::uint32_t e : table.entries) {
        if (e >= static_cast<std::uint32_t>(in_channels)) {
            throw ShapeError("projection table references channel " + std::to_string(e) +
                             " but input has " + std::to_string(in_channels));
        }
    }
}

}  // namespace lbpnet
