#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lbpnet/conv1x1.hpp"
#include "lbpnet/feature_map.hpp"
#include "lbpnet/lbp_layer.hpp"
#include "lbpnet/mlp_head.hpp"
#include "lbpnet/op_counter.hpp"

namespace lbpnet {

struct InputShape {
    int channels = 1;
    int height = 32;
    int width = 32;
    friend bool operator==(const InputShape&, const InputShape&) = default;
};

enum class BlockKind { mac_free, transition };

/// mac_free: concat(input, shifted_relu(lbp(input)))
/// transition: input + conv1x1(shifted_relu(lbp(input))), conv maps back to the input width
struct BlockConfig {
    BlockKind kind = BlockKind::mac_free;
    int lbp_out_channels = 0;
    int n_points = 4;
    int area = 5;
    bool pool_after = true;
    friend bool operator==(const BlockConfig&, const BlockConfig&) = default;
};

struct NetworkConfig {
    InputShape input;
    std::vector<BlockConfig> blocks;
    int hidden = 512;
    int classes = 10;
    double dropout = 0.5;
    /// Dropout on the flattened features; unset means `dropout`.
    std::optional<double> input_dropout;
    double bn_momentum = 0.1;
    /// Surrogate temperature for pixel channels (values in [0, 1]); channels
    /// holding n-bit codes use k * 2^(n-1).
    double k = 10.0 / 255.0;
    double init_sigma = 1.0;
    /// Training forward; see ForwardValue.
    ForwardValue train_forward = ForwardValue::hard;
    std::uint64_t seed = 0;
    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Shapes seen by one block, derived from the config.
struct BlockGeometry {
    int in_channels = 0;
    int out_channels = 0;
    int height = 0;  // input (and LBP output) spatial size
    int width = 0;
    int out_height = 0;  // after optional pooling
    int out_width = 0;
    std::vector<double> channel_scale;  // surrogate k multiplier per input channel
};

/// Validates the config and walks channel/spatial sizes through every block.
/// Throws ConfigError on degenerate stacks (zero LBP channels, odd pooling
/// sizes, bad areas, n outside [1, 16]).
std::vector<BlockGeometry> plan_network(const NetworkConfig& cfg);

/// Number of features entering the MLP head.
int feature_size(const NetworkConfig& cfg);

HeadConfig head_config(const NetworkConfig& cfg);

struct Block {
    BlockConfig config;
    BlockGeometry geometry;
    std::vector<Pattern> patterns;
    ProjectionTable projection;
    std::optional<Conv1x1> conv;
    ForwardValue train_forward = ForwardValue::soft;

    SurrogateConfig surrogate(double k) const { return {k, geometry.channel_scale, train_forward}; }
};

/// Per-block intermediates from a surrogate forward, consumed by backward.
struct BlockCache {
    FeatureMap input;
    FeatureMap lbp_out;
    SurrogateCache surrogate;
    FeatureMap activated;  // transition blocks only: conv input
    int pre_pool_channels = 0;
    int pre_pool_height = 0;
    int pre_pool_width = 0;
    std::vector<std::uint32_t> pool_argmax;
};

struct SampleCache {
    std::vector<BlockCache> blocks;
};

struct BlockGradients {
    std::vector<std::vector<Grad2D>> positions;  // [out_channel][point]
    std::vector<double> conv_weights;
    std::vector<double> conv_bias;
};

struct StackGradients {
    std::vector<BlockGradients> blocks;

    /// Zeroed gradients shaped like the network's blocks.
    static StackGradients zeros_like(const std::vector<Block>& blocks);
    void add(const StackGradients& other);
};

// One block on its own. `input` must match the block geometry.
FeatureMap mac_free_block_forward(const FeatureMap& input, const Block& block, double k,
                                  BlockCache* cache = nullptr);
FeatureMap transition_block_forward(const FeatureMap& input, const Block& block, double k,
                                    BlockCache* cache = nullptr);

/// A complete model: pattern stack plus classifier head.
class Network {
public:
    static Network create(const NetworkConfig& cfg);
    Network(NetworkConfig cfg, std::vector<Block> blocks, MlpHead head);

    const NetworkConfig& config() const noexcept { return config_; }
    const std::vector<Block>& blocks() const noexcept { return blocks_; }
    std::vector<Block>& blocks() noexcept { return blocks_; }
    const MlpHead& head() const noexcept { return head_; }
    MlpHead& head() noexcept { return head_; }

    /// Training-mode stack at full fractional precision; k multiplies every
    /// block's temperature (1 = configured value).
    FeatureMap forward_surrogate(const FeatureMap& image, double k_scale = 1.0,
                                 SampleCache* cache = nullptr) const;

    /// Reference binary-mode stack evaluated on real maps with rounded taps.
    FeatureMap forward_hard(const FeatureMap& image, OpCounter* counter = nullptr) const;

    /// Gradients of sum(grad_features * features) w.r.t. every pattern offset
    /// and conv parameter, for one sample.
    StackGradients backward(const SampleCache& cache, const FeatureMap& grad_features,
                            double k_scale = 1.0) const;

    /// Eval-mode logits for hard features of one image.
    std::vector<double> predict_scores(const FeatureMap& image) const;
    int predict(const FeatureMap& image) const;

    friend bool operator==(const Network&, const Network&);

private:
    NetworkConfig config_;
    std::vector<Block> blocks_;
    MlpHead head_;
};

/// Row-vector view of a final feature map for the head.
Matrix features_row(const FeatureMap& features);

}  // namespace lbpnet
