#include "lbpnet/conv1x1.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "lbpnet/random.hpp"

namespace lbpnet {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

void check_input(const FeatureMap& input, const Conv1x1& layer) {
    if (input.channels() != layer.in_channels) {
        throw ShapeError("conv1x1: input has " + std::to_string(input.channels()) +
                         " channels, layer expects " + std::to_string(layer.in_channels));
    }
}

}  // namespace

Conv1x1::Conv1x1(int in, int out)
    : in_channels(in),
      out_channels(out),
      weights(static_cast<std::size_t>(in) * out, 0.0),
      bias(static_cast<std::size_t>(out), 0.0) {
    if (in < 1 || out < 1) throw ConfigError("conv1x1: channel counts must be positive");
}

Conv1x1 Conv1x1::identity(int channels) {
    Conv1x1 c(channels, channels);
    for (int i = 0; i < channels; ++i) c.weight(i, i) = 1.0;
    return c;
}

Conv1x1 Conv1x1::random(int in, int out, std::uint64_t seed, std::uint64_t stream) {
    Conv1x1 c(in, out);
    CounterRng rng(seed, stream);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& w : c.weights) w = bound * (2.0 * rng.uniform01() - 1.0);
    return c;
}

FeatureMap conv1x1_forward(const FeatureMap& input, const Conv1x1& layer, OpCounter* counter) {
    check_input(input, layer);
    const auto hw = static_cast<Eigen::Index>(input.plane_size());
    FeatureMap out(layer.out_channels, input.height(), input.width());
    ConstMap x(input.data().data(), layer.in_channels, hw);
    ConstMap wm(layer.weights.data(), layer.out_channels, layer.in_channels);
    MutMap y(out.data().data(), layer.out_channels, hw);
    y.noalias() = wm * x;
    const Eigen::Map<const Eigen::VectorXd> b(layer.bias.data(), layer.out_channels);
    y.colwise() += b;
    if (counter) {
        const auto macs = static_cast<std::uint64_t>(hw) * layer.out_channels * layer.in_channels;
        counter->multiplications += macs;
        counter->additions += macs;
    }
    return out;
}

Conv1x1Gradients conv1x1_backward(const FeatureMap& input, const Conv1x1& layer, const FeatureMap& grad_out) {
    check_input(input, layer);
    if (grad_out.channels() != layer.out_channels || grad_out.height() != input.height() ||
        grad_out.width() != input.width()) {
        throw ShapeError("conv1x1_backward: grad_out shape mismatch");
    }
    const auto hw = static_cast<Eigen::Index>(input.plane_size());
    Conv1x1Gradients g;
    g.weights.assign(layer.weights.size(), 0.0);
    g.bias.assign(layer.bias.size(), 0.0);
    g.input = FeatureMap(input.channels(), input.height(), input.width());

    ConstMap x(input.data().data(), layer.in_channels, hw);
    ConstMap gy(grad_out.data().data(), layer.out_channels, hw);
    ConstMap wm(layer.weights.data(), layer.out_channels, layer.in_channels);
    MutMap gw(g.weights.data(), layer.out_channels, layer.in_channels);
    MutMap gx(g.input.data().data(), layer.in_channels, hw);
    gw.noalias() = gy * x.transpose();
    gx.noalias() = wm.transpose() * gy;
    Eigen::Map<Eigen::VectorXd>(g.bias.data(), layer.out_channels) = gy.rowwise().sum();
    return g;
}

}  // namespace lbpnet
