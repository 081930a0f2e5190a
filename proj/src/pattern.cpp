#include "lbpnet/pattern.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lbpnet/errors.hpp"

namespace lbpnet {

double area_radius(int area) noexcept { return (area - 1) / 2.0; }

void validate_area(int area) {
    if (area < 3 || area % 2 == 0) {
        throw ConfigError("pattern area must be odd and >= 3, got " + std::to_string(area));
    }
}

std::vector<Pattern> init_patterns(std::uint64_t seed, int out_channels, int n_points, int area,
                                   double sigma, std::uint64_t stream) {
    validate_area(area);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ConfigError("init_patterns: sigma must be positive");
    }
    if (n_points < 1) throw ConfigError("init_patterns: need at least one sampling point");
    if (out_channels < 0) throw ConfigError("init_patterns: negative channel count");

    CounterRng rng(seed, stream);
    const double r = area_radius(area);
    std::vector<Pattern> patterns(static_cast<std::size_t>(out_channels));
    for (auto& p : patterns) {
        p.points.resize(static_cast<std::size_t>(n_points));
        for (auto& pt : p.points) {
            pt.dx = std::clamp(sigma * rng.normal(), -r, r);
            pt.dy = std::clamp(sigma * rng.normal(), -r, r);
        }
    }
    return patterns;
}

void clamp_positions(std::vector<Pattern>& patterns, int area) {
    const double r = area_radius(area);
    for (auto& p : patterns) {
        for (auto& pt : p.points) {
            pt.dx = std::clamp(pt.dx, -r, r);
            pt.dy = std::clamp(pt.dy, -r, r);
        }
    }
}

std::vector<Pattern> clamped(std::vector<Pattern> patterns, int area) {
    clamp_positions(patterns, area);
    return patterns;
}

int round_offset(double v) noexcept { return static_cast<int>(std::round(v)); }

Tap to_tap(const Offset& o, int area) noexcept {
    const int r = (area - 1) / 2;
    return {std::clamp(round_offset(o.dx), -r, r), std::clamp(round_offset(o.dy), -r, r)};
}

std::uint32_t tap_index(const Tap& t, int area) noexcept {
    const int r = (area - 1) / 2;
    return static_cast<std::uint32_t>((t.dy + r) * area + (t.dx + r));
}

Tap tap_from_index(std::uint32_t index, int area) noexcept {
    const int r = (area - 1) / 2;
    const int i = static_cast<int>(index);
    return {i % area - r, i / area - r};
}

}  // namespace lbpnet
