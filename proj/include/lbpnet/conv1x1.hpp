#pragma once

#include <cstdint>
#include <vector>

#include "lbpnet/feature_map.hpp"
#include "lbpnet/op_counter.hpp"

namespace lbpnet {

/// Pointwise channel mixing: out[o] = bias[o] + sum_c weights[o, c] * in[c].
struct Conv1x1 {
    int in_channels = 0;
    int out_channels = 0;
    std::vector<double> weights;  // row-major out_channels x in_channels
    std::vector<double> bias;

    Conv1x1() = default;
    Conv1x1(int in, int out);

    double& weight(int o, int c) noexcept { return weights[static_cast<std::size_t>(o) * in_channels + c]; }
    double weight(int o, int c) const noexcept {
        return weights[static_cast<std::size_t>(o) * in_channels + c];
    }

    static Conv1x1 identity(int channels);
    /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
    static Conv1x1 random(int in, int out, std::uint64_t seed, std::uint64_t stream);

    friend bool operator==(const Conv1x1&, const Conv1x1&) = default;
};

FeatureMap conv1x1_forward(const FeatureMap& input, const Conv1x1& layer, OpCounter* counter = nullptr);

struct Conv1x1Gradients {
    std::vector<double> weights;
    std::vector<double> bias;
    FeatureMap input;
};

Conv1x1Gradients conv1x1_backward(const FeatureMap& input, const Conv1x1& layer, const FeatureMap& grad_out);

}  // namespace lbpnet
