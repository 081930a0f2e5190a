#pragma once

#include <cstdint>
#include <string_view>

namespace lbpnet {

/// Counter-based generator: output i of stream (seed, stream) is
/// splitmix64_mix(key + (i + 1) * golden), key = splitmix64_mix(seed ^ splitmix64_mix(stream + 1)).
///
/// Integer outputs (and therefore projection tables and index draws) are
/// identical on every platform. The name is written into model files.
class CounterRng {
public:
    static constexpr std::string_view kAlgorithm = "splitmix64-ctr";
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix(seed ^ mix(stream + 1))) {}

    std::uint64_t at(std::uint64_t counter) const noexcept {
        return mix(key_ + (counter + 1) * kGolden);
    }

    std::uint64_t next_u64() noexcept { return at(counter_++); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Unbiased uniform integer in [0, n) by rejection; n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) noexcept {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller (pairs are consumed together).
    double normal() noexcept;

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Fixed stream identifiers so each consumer draws from its own sequence.
namespace streams {
inline constexpr std::uint64_t kPatterns = 0x100;
inline constexpr std::uint64_t kProjection = 0x200;
inline constexpr std::uint64_t kHead = 0x300;
inline constexpr std::uint64_t kConv = 0x400;
inline constexpr std::uint64_t kShuffle = 0x500;
inline constexpr std::uint64_t kDropout = 0x600;
}  // namespace streams

}  // namespace lbpnet
