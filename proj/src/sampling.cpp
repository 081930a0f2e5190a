#include "lbpnet/sampling.hpp"

#include <cmath>
#include <string>

namespace lbpnet {

namespace {

void check_channel(const FeatureMap& map, int channel) {
    if (channel < 0 || channel >= map.channels()) {
        throw ShapeError("bilinear sampling: channel " + std::to_string(channel) +
                         " out of range for map with " + std::to_string(map.channels()) +
                         " channels");
    }
}

}  // namespace

BilinearCell bilinear_cell(double x, double y) noexcept {
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    return {static_cast<int>(fx0), static_cast<int>(fy0), x - fx0, y - fy0};
}

double bilinear_sample(const FeatureMap& map, int channel, double x, double y) {
    check_channel(map, channel);
    const auto cell = bilinear_cell(x, y);
    const double v00 = map.value_or_zero(channel, cell.y0, cell.x0);
    const double v01 = map.value_or_zero(channel, cell.y0, cell.x0 + 1);
    const double v10 = map.value_or_zero(channel, cell.y0 + 1, cell.x0);
    const double v11 = map.value_or_zero(channel, cell.y0 + 1, cell.x0 + 1);
    const double top = v00 + cell.fx * (v01 - v00);
    const double bottom = v10 + cell.fx * (v11 - v10);
    return top + cell.fy * (bottom - top);
}

Grad2D bilinear_sample_grad(const FeatureMap& map, int channel, double x, double y) {
    check_channel(map, channel);
    const auto cell = bilinear_cell(x, y);
    const double v00 = map.value_or_zero(channel, cell.y0, cell.x0);
    const double v01 = map.value_or_zero(channel, cell.y0, cell.x0 + 1);
    const double v10 = map.value_or_zero(channel, cell.y0 + 1, cell.x0);
    const double v11 = map.value_or_zero(channel, cell.y0 + 1, cell.x0 + 1);
    return {(1.0 - cell.fy) * (v01 - v00) + cell.fy * (v11 - v10),
            (1.0 - cell.fx) * (v10 - v00) + cell.fx * (v11 - v01)};
}

}  // namespace lbpnet
