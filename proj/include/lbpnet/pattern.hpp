#pragma once

#include <cstdint>
#include <vector>

#include "lbpnet/random.hpp"

namespace lbpnet {

/// Sampling-point displacement from the pivot, in pixels (dx along width).
struct Offset {
    double dx = 0.0;
    double dy = 0.0;
    friend bool operator==(const Offset&, const Offset&) = default;
};

/// One output channel's sampling points. points[i] drives bit i of the
/// output code, so the last point is the most significant bit. The pivot is
/// the output pixel itself and is never moved.
struct Pattern {
    std::vector<Offset> points;

    int size() const noexcept { return static_cast<int>(points.size()); }
    friend bool operator==(const Pattern&, const Pattern&) = default;
};

/// Half-width of an odd pattern area: offsets live in [-radius, radius].
double area_radius(int area) noexcept;

/// Throws ConfigError unless `area` is odd and at least 3.
void validate_area(int area);

/// Draws every offset coordinate from Normal(0, sigma^2) and clamps it into
/// the area box. Deterministic in (seed, stream).
std::vector<Pattern> init_patterns(std::uint64_t seed, int out_channels, int n_points, int area,
                                   double sigma, std::uint64_t stream = streams::kPatterns);

/// Clamps each coordinate into [-(area-1)/2, (area-1)/2]. Idempotent.
void clamp_positions(std::vector<Pattern>& patterns, int area);
std::vector<Pattern> clamped(std::vector<Pattern> patterns, int area);

/// Nearest integer, halves away from zero.
int round_offset(double v) noexcept;

/// Integer tap for deployment: each coordinate rounded then clamped to the area.
struct Tap {
    int dx = 0;
    int dy = 0;
    friend bool operator==(const Tap&, const Tap&) = default;
};
Tap to_tap(const Offset& o, int area) noexcept;

/// Row-major index of a tap within the area window, in [0, area*area).
std::uint32_t tap_index(const Tap& t, int area) noexcept;
Tap tap_from_index(std::uint32_t index, int area) noexcept;

}  // namespace lbpnet
