#pragma once

#include <span>
#include <vector>

#include "lbpnet/feature_map.hpp"
#include "lbpnet/op_counter.hpp"
#include "lbpnet/pattern.hpp"
#include "lbpnet/projection.hpp"
#include "lbpnet/sampling.hpp"

namespace lbpnet {

/// Temperature of the tanh comparison surrogate. The effective temperature
/// for input channel c is k * channel_scale[c] (scale 1 when the vector is
/// empty), so pixel channels and n-bit code channels can share one layer.
/// What the training forward emits. Gradients always come from the tanh
/// surrogate at the fractional sampling position.
///   soft: the surrogate value itself
///   hard_bits: hard comparison of the bilinear sample against the pivot
///   hard: hard comparison at the rounded tap, identical to deployment
enum class ForwardValue { soft, hard_bits, hard };

struct SurrogateConfig {
    double k = 10.0 / 255.0;
    std::vector<double> channel_scale;
    ForwardValue forward = ForwardValue::soft;

    double k_for(int channel) const noexcept {
        return channel_scale.empty() ? k : k * channel_scale[static_cast<std::size_t>(channel)];
    }
};

/// Throws ConfigError unless k and every scale are positive and finite, and
/// the scale vector (when present) covers `in_channels`.
void validate_surrogate(const SurrogateConfig& cfg, int in_channels);

/// tanh values saved by the surrogate forward, indexed [out][bit][pixel].
struct SurrogateCache {
    std::vector<double> tanh_values;
};

/// Comparison-only forward. Bit i of output channel o at pixel p is
/// [I(src, p + round(points[i])) > I(src, p)] with src = proj.source(o, i);
/// the code is sum_i 2^i * bit_i. Output keeps the input's spatial size
/// (zero padding). Performs exactly n comparisons per output pixel and no
/// arithmetic on pixel values.
template <typename T>
BasicFeatureMap<T> lbp_forward_hard(const BasicFeatureMap<T>& input, std::span<const Pattern> patterns,
                                    const ProjectionTable& proj, OpCounter* counter = nullptr);

/// Differentiable forward: soft bit 0.5 * (tanh((I_p - I_c) / k) + 1) with
/// I_p bilinearly sampled at the fractional offset; output sum_i 2^i * soft_i.
/// With cfg.forward != soft the output bits are hard (straight-through) while
/// the cache still holds the surrogate for backward.
FeatureMap lbp_forward_surrogate(const FeatureMap& input, std::span<const Pattern> patterns,
                                 const ProjectionTable& proj, const SurrogateConfig& cfg,
                                 SurrogateCache* cache = nullptr);

struct LbpGradients {
    std::vector<std::vector<Grad2D>> positions;  // [out_channel][point]
    FeatureMap input;                            // empty unless requested
};

/// Gradients of sum(grad_out * surrogate_output) with respect to every
/// sampling-point offset and (optionally) every input value. `cache`, when
/// given, must come from the matching lbp_forward_surrogate call.
LbpGradients lbp_backward(const FeatureMap& input, std::span<const Pattern> patterns,
                          const ProjectionTable& proj, const SurrogateConfig& cfg,
                          const FeatureMap& grad_out, const SurrogateCache* cache = nullptr,
                          bool want_input_grad = true);

}  // namespace lbpnet
