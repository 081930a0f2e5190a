#pragma once

#include "lbpnet/feature_map.hpp"

namespace lbpnet {

/// Spatial derivative of a sampled value, per unit pixel.
struct Grad2D {
    double d_dx = 0.0;
    double d_dy = 0.0;
};

/// Bilinear interpolation of `map` at (x, y) in pixel coordinates, x along
/// width. Reads outside the grid see zero.
double bilinear_sample(const FeatureMap& map, int channel, double x, double y);

/// Analytic partials of the bilinear interpolant. Constant within each unit
/// cell; a coordinate lying exactly on a grid line uses the cell to its
/// right/below.
Grad2D bilinear_sample_grad(const FeatureMap& map, int channel, double x, double y);

/// Integer cell origin plus fractional position inside the cell.
struct BilinearCell {
    int x0 = 0;
    int y0 = 0;
    double fx = 0.0;
    double fy = 0.0;
};

BilinearCell bilinear_cell(double x, double y) noexcept;

}  // namespace lbpnet
