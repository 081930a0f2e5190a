#include "lbpnet/network.hpp"

#include <algorithm>
#include <string>

#include "lbpnet/activations.hpp"
#include "lbpnet/errors.hpp"

namespace lbpnet {

namespace {

const char* kind_name(BlockKind k) { return k == BlockKind::mac_free ? "mac_free" : "transition"; }

FeatureMap apply_shifted_relu(const FeatureMap& m, int n_bits) { return shifted_relu(m, n_bits); }

FeatureMap gate_shifted_relu(const FeatureMap& grad, const FeatureMap& pre, int n_bits) {
    FeatureMap out(grad.channels(), grad.height(), grad.width());
    const auto g = grad.data();
    const auto x = pre.data();
    auto o = out.data();
    for (std::size_t i = 0; i < g.size(); ++i) o[i] = g[i] * shifted_relu_derivative(x[i], n_bits);
    return out;
}

FeatureMap maybe_pool(FeatureMap m, const Block& block, BlockCache* cache) {
    if (cache) {
        cache->pre_pool_channels = m.channels();
        cache->pre_pool_height = m.height();
        cache->pre_pool_width = m.width();
    }
    if (!block.config.pool_after) return m;
    return max_pool2(m, cache ? &cache->pool_argmax : nullptr);
}

void check_block_input(const FeatureMap& input, const Block& block) {
    const auto& g = block.geometry;
    if (input.channels() != g.in_channels || input.height() != g.height || input.width() != g.width) {
        throw ShapeError("block input is " + std::to_string(input.channels()) + "x" +
                         std::to_string(input.height()) + "x" + std::to_string(input.width()) +
                         ", block expects " + std::to_string(g.in_channels) + "x" + std::to_string(g.height) +
                         "x" + std::to_string(g.width));
    }
}

template <typename T>
BasicFeatureMap<T> hard_block(const BasicFeatureMap<T>& input, const Block& block, OpCounter* counter);

}  // namespace

std::vector<BlockGeometry> plan_network(const NetworkConfig& cfg) {
    const auto& in = cfg.input;
    if (in.channels < 1 || in.height < 1 || in.width < 1) throw ConfigError("input shape must be positive");
    if (!(cfg.k > 0.0)) throw ConfigError("surrogate k must be positive");
    if (!(cfg.init_sigma > 0.0)) throw ConfigError("init_sigma must be positive");

    std::vector<BlockGeometry> plan;
    int channels = in.channels;
    int h = in.height;
    int w = in.width;
    std::vector<double> scale(static_cast<std::size_t>(channels), 1.0);
    for (std::size_t b = 0; b < cfg.blocks.size(); ++b) {
        const auto& bc = cfg.blocks[b];
        const std::string where = "block " + std::to_string(b) + " (" + kind_name(bc.kind) + ")";
        if (bc.lbp_out_channels < 1) throw ConfigError(where + ": lbp_out_channels must be >= 1");
        if (bc.n_points < 1 || bc.n_points > 16) throw ConfigError(where + ": n_points must be in [1, 16]");
        validate_area(bc.area);
        BlockGeometry g;
        g.in_channels = channels;
        g.height = h;
        g.width = w;
        g.channel_scale = scale;
        const double code_scale = static_cast<double>(1u << (bc.n_points - 1));
        if (bc.kind == BlockKind::mac_free) {
            g.out_channels = channels + bc.lbp_out_channels;
            scale.resize(static_cast<std::size_t>(g.out_channels), code_scale);
        } else {
            g.out_channels = channels;
        }
        if (bc.pool_after) {
            if (h % 2 != 0 || w % 2 != 0) throw ConfigError(where + ": pooling needs even spatial size");
            h /= 2;
            w /= 2;
        }
        g.out_height = h;
        g.out_width = w;
        channels = g.out_channels;
        plan.push_back(std::move(g));
    }
    return plan;
}

int feature_size(const NetworkConfig& cfg) {
    const auto plan = plan_network(cfg);
    if (plan.empty()) return cfg.input.channels * cfg.input.height * cfg.input.width;
    const auto& last = plan.back();
    return last.out_channels * last.out_height * last.out_width;
}

HeadConfig head_config(const NetworkConfig& cfg) {
    HeadConfig h;
    h.inputs = feature_size(cfg);
    h.hidden = cfg.hidden;
    h.classes = cfg.classes;
    h.dropout = cfg.dropout;
    h.input_dropout = cfg.input_dropout.value_or(cfg.dropout);
    h.bn_momentum = cfg.bn_momentum;
    return h;
}

StackGradients StackGradients::zeros_like(const std::vector<Block>& blocks) {
    StackGradients g;
    g.blocks.resize(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        g.blocks[b].positions.assign(blocks[b].patterns.size(),
                                     std::vector<Grad2D>(static_cast<std::size_t>(blocks[b].config.n_points)));
        if (blocks[b].conv) {
            g.blocks[b].conv_weights.assign(blocks[b].conv->weights.size(), 0.0);
            g.blocks[b].conv_bias.assign(blocks[b].conv->bias.size(), 0.0);
        }
    }
    return g;
}

void StackGradients::add(const StackGradients& other) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto& dst = blocks[b];
        const auto& src = other.blocks[b];
        for (std::size_t o = 0; o < dst.positions.size(); ++o) {
            for (std::size_t i = 0; i < dst.positions[o].size(); ++i) {
                dst.positions[o][i].d_dx += src.positions[o][i].d_dx;
                dst.positions[o][i].d_dy += src.positions[o][i].d_dy;
            }
        }
        for (std::size_t i = 0; i < dst.conv_weights.size(); ++i) dst.conv_weights[i] += src.conv_weights[i];
        for (std::size_t i = 0; i < dst.conv_bias.size(); ++i) dst.conv_bias[i] += src.conv_bias[i];
    }
}

FeatureMap mac_free_block_forward(const FeatureMap& input, const Block& block, double k, BlockCache* cache) {
    if (block.config.kind != BlockKind::mac_free) throw ConfigError("mac_free_block_forward: wrong block kind");
    check_block_input(input, block);
    const auto cfg = block.surrogate(k);
    FeatureMap lbp = lbp_forward_surrogate(input, block.patterns, block.projection, cfg,
                                           cache ? &cache->surrogate : nullptr);
    FeatureMap joined = concat_channels(input, apply_shifted_relu(lbp, block.config.n_points));
    if (cache) {
        cache->input = input;
        cache->lbp_out = std::move(lbp);
    }
    return maybe_pool(std::move(joined), block, cache);
}

FeatureMap transition_block_forward(const FeatureMap& input, const Block& block, double k, BlockCache* cache) {
    if (block.config.kind != BlockKind::transition || !block.conv) {
        throw ConfigError("transition_block_forward: wrong block kind");
    }
    check_block_input(input, block);
    if (block.conv->out_channels != input.channels() || block.conv->in_channels != block.config.lbp_out_channels) {
        throw ShapeError("transition block: conv1x1 does not map LBP channels back onto the residual input");
    }
    const auto cfg = block.surrogate(k);
    FeatureMap lbp = lbp_forward_surrogate(input, block.patterns, block.projection, cfg,
                                           cache ? &cache->surrogate : nullptr);
    FeatureMap act = apply_shifted_relu(lbp, block.config.n_points);
    FeatureMap out = conv1x1_forward(act, *block.conv);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += input.data()[i];
    if (cache) {
        cache->input = input;
        cache->lbp_out = std::move(lbp);
        cache->activated = std::move(act);
    }
    return maybe_pool(std::move(out), block, cache);
}

namespace {

template <typename T>
BasicFeatureMap<T> hard_block(const BasicFeatureMap<T>& input, const Block& block, OpCounter* counter) {
    const auto& g = block.geometry;
    if (input.channels() != g.in_channels || input.height() != g.height || input.width() != g.width) {
        throw ShapeError("hard forward: block input shape mismatch");
    }
    const int n = block.config.n_points;
    auto codes = shifted_relu(lbp_forward_hard(input, block.patterns, block.projection, counter), n);
    BasicFeatureMap<T> out;
    if (block.config.kind == BlockKind::mac_free) {
        out = concat_channels(input, codes);
    } else {
        if constexpr (std::is_floating_point_v<T>) {
            out = conv1x1_forward(codes, *block.conv, counter);
            for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += input.data()[i];
            if (counter) counter->additions += out.size();
        } else {
            throw ShapeError("transition blocks need real-valued maps");
        }
    }
    if (block.config.pool_after) out = max_pool2(out);
    return out;
}

}  // namespace

Network Network::create(const NetworkConfig& cfg) {
    const auto plan = plan_network(cfg);
    std::vector<Block> blocks;
    blocks.reserve(plan.size());
    for (std::size_t b = 0; b < plan.size(); ++b) {
        const auto& bc = cfg.blocks[b];
        Block block;
        block.config = bc;
        block.geometry = plan[b];
        block.patterns = init_patterns(cfg.seed, bc.lbp_out_channels, bc.n_points, bc.area, cfg.init_sigma,
                                       streams::kPatterns + b);
        block.projection = build_projection(cfg.seed, plan[b].in_channels, bc.n_points, bc.lbp_out_channels,
                                            streams::kProjection + b);
        if (bc.kind == BlockKind::transition) {
            block.conv = Conv1x1::random(bc.lbp_out_channels, plan[b].in_channels, cfg.seed, streams::kConv + b);
        }
        blocks.push_back(std::move(block));
    }
    return Network(cfg, std::move(blocks), MlpHead::init(head_config(cfg), cfg.seed));
}

Network::Network(NetworkConfig cfg, std::vector<Block> blocks, MlpHead head)
    : config_(std::move(cfg)), blocks_(std::move(blocks)), head_(std::move(head)) {
    const auto plan = plan_network(config_);
    if (plan.size() != blocks_.size()) throw ConfigError("network: block count does not match config");
    for (std::size_t b = 0; b < plan.size(); ++b) {
        auto& block = blocks_[b];
        block.config = config_.blocks[b];
        block.geometry = plan[b];
        block.train_forward = config_.train_forward;
        if (block.patterns.size() != static_cast<std::size_t>(block.config.lbp_out_channels)) {
            throw ShapeError("network: pattern count does not match block " + std::to_string(b));
        }
        check_projection(block.projection, plan[b].in_channels, block.config.lbp_out_channels,
                         block.config.n_points);
        if ((block.config.kind == BlockKind::transition) != block.conv.has_value()) {
            throw ShapeError("network: conv1x1 presence does not match block kind");
        }
    }
    if (head_.config.inputs != feature_size(config_)) throw ShapeError("network: head input size mismatch");
}

FeatureMap Network::forward_surrogate(const FeatureMap& image, double k_scale, SampleCache* cache) const {
    if (cache) cache->blocks.resize(blocks_.size());
    FeatureMap x = image;
    const double k = config_.k * k_scale;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        BlockCache* bc = cache ? &cache->blocks[b] : nullptr;
        x = blocks_[b].config.kind == BlockKind::mac_free ? mac_free_block_forward(x, blocks_[b], k, bc)
                                                           : transition_block_forward(x, blocks_[b], k, bc);
    }
    return x;
}

FeatureMap Network::forward_hard(const FeatureMap& image, OpCounter* counter) const {
    FeatureMap x = image;
    for (const auto& block : blocks_) x = hard_block(x, block, counter);
    return x;
}

StackGradients Network::backward(const SampleCache& cache, const FeatureMap& grad_features, double k_scale) const {
    if (cache.blocks.size() != blocks_.size()) throw ShapeError("backward: cache does not match network");
    StackGradients grads;
    grads.blocks.resize(blocks_.size());
    const double k = config_.k * k_scale;
    FeatureMap g = grad_features;
    for (std::size_t bi = blocks_.size(); bi-- > 0;) {
        const auto& block = blocks_[bi];
        const auto& bc = cache.blocks[bi];
        const int n = block.config.n_points;
        const bool need_input_grad = bi > 0;

        if (block.config.pool_after) {
            FeatureMap un(bc.pre_pool_channels, bc.pre_pool_height, bc.pre_pool_width);
            const auto src = g.data();
            for (std::size_t i = 0; i < src.size(); ++i) un.data()[bc.pool_argmax[i]] += src[i];
            g = std::move(un);
        }

        FeatureMap g_input;
        FeatureMap g_lbp;
        auto& out = grads.blocks[bi];
        if (block.config.kind == BlockKind::mac_free) {
            const int in_c = block.geometry.in_channels;
            if (need_input_grad) g_input = slice_channels(g, 0, in_c);
            g_lbp = gate_shifted_relu(slice_channels(g, in_c, block.config.lbp_out_channels), bc.lbp_out, n);
        } else {
            auto cg = conv1x1_backward(bc.activated, *block.conv, g);
            out.conv_weights = std::move(cg.weights);
            out.conv_bias = std::move(cg.bias);
            g_lbp = gate_shifted_relu(cg.input, bc.lbp_out, n);
            if (need_input_grad) g_input = std::move(g);
        }

        auto lg = lbp_backward(bc.input, block.patterns, block.projection, block.surrogate(k), g_lbp, &bc.surrogate,
                               need_input_grad);
        out.positions = std::move(lg.positions);
        if (need_input_grad) {
            for (std::size_t i = 0; i < g_input.size(); ++i) g_input.data()[i] += lg.input.data()[i];
            g = std::move(g_input);
        }
    }
    return grads;
}

Matrix features_row(const FeatureMap& features) {
    Matrix row(1, static_cast<Eigen::Index>(features.size()));
    std::copy(features.data().begin(), features.data().end(), row.data());
    return row;
}

std::vector<double> Network::predict_scores(const FeatureMap& image) const {
    const Matrix logits = mlp_head_forward(head_, features_row(forward_hard(image)), Mode::eval, nullptr);
    return {logits.data(), logits.data() + logits.size()};
}

int Network::predict(const FeatureMap& image) const {
    const auto scores = predict_scores(image);
    return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

bool operator==(const Network& a, const Network& b) {
    if (!(a.config_ == b.config_) || a.blocks_.size() != b.blocks_.size()) return false;
    for (std::size_t i = 0; i < a.blocks_.size(); ++i) {
        const auto& x = a.blocks_[i];
        const auto& y = b.blocks_[i];
        if (!(x.patterns == y.patterns) || !(x.projection == y.projection) || !(x.conv == y.conv)) return false;
    }
    const auto& h = a.head_;
    const auto& k = b.head_;
    return h.w1 == k.w1 && h.b1 == k.b1 && h.gamma == k.gamma && h.beta == k.beta &&
           h.running_mean == k.running_mean && h.running_var == k.running_var && h.w2 == k.w2 && h.b2 == k.b2;
}

}  // namespace lbpnet
