#include "lbpnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lbpnet/errors.hpp"
#include "parallel.hpp"

namespace lbpnet {

namespace {

// Momentum buffers mirror the trainable state.
struct Velocity {
    std::vector<std::vector<std::vector<Offset>>> positions;
    std::vector<std::vector<double>> conv_weights;
    std::vector<std::vector<double>> conv_bias;
    Matrix w1, w2;
    Eigen::VectorXd b1, gamma, beta, b2;

    explicit Velocity(const Network& net) {
        for (const auto& b : net.blocks()) {
            std::vector<std::vector<Offset>> pv;
            for (const auto& p : b.patterns) pv.emplace_back(p.points.size());
            positions.push_back(std::move(pv));
            conv_weights.emplace_back(b.conv ? b.conv->weights.size() : 0, 0.0);
            conv_bias.emplace_back(b.conv ? b.conv->bias.size() : 0, 0.0);
        }
        const auto& h = net.head();
        w1 = Matrix::Zero(h.w1.rows(), h.w1.cols());
        w2 = Matrix::Zero(h.w2.rows(), h.w2.cols());
        b1 = Eigen::VectorXd::Zero(h.b1.size());
        gamma = Eigen::VectorXd::Zero(h.gamma.size());
        beta = Eigen::VectorXd::Zero(h.beta.size());
        b2 = Eigen::VectorXd::Zero(h.b2.size());
    }
};

void sgd(double& value, double& velocity, double grad, double lr, double momentum, double decay) {
    velocity = momentum * velocity + grad + decay * value;
    value -= lr * velocity;
}

template <typename M>
void sgd_dense(M& value, M& velocity, const M& grad, double lr, double momentum, double decay) {
    velocity = momentum * velocity + grad + decay * value;
    value -= lr * velocity;
}

void apply_step(Network& net, Velocity& v, const BatchResult& g, const OptimConfig& cfg, double pos_lr,
                double w_lr) {
    auto& blocks = net.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto& block = blocks[b];
        const auto& gb = g.stack.blocks[b];
        for (std::size_t o = 0; o < block.patterns.size(); ++o) {
            for (std::size_t i = 0; i < block.patterns[o].points.size(); ++i) {
                auto& pt = block.patterns[o].points[i];
                auto& vel = v.positions[b][o][i];
                sgd(pt.dx, vel.dx, gb.positions[o][i].d_dx, pos_lr, cfg.momentum, 0.0);
                sgd(pt.dy, vel.dy, gb.positions[o][i].d_dy, pos_lr, cfg.momentum, 0.0);
            }
        }
        clamp_positions(block.patterns, block.config.area);
        if (block.conv) {
            for (std::size_t i = 0; i < block.conv->weights.size(); ++i)
                sgd(block.conv->weights[i], v.conv_weights[b][i], gb.conv_weights[i], w_lr, cfg.momentum,
                    cfg.weight_decay);
            for (std::size_t i = 0; i < block.conv->bias.size(); ++i)
                sgd(block.conv->bias[i], v.conv_bias[b][i], gb.conv_bias[i], w_lr, cfg.momentum, 0.0);
        }
    }
    auto& h = net.head();
    sgd_dense(h.w1, v.w1, g.head.w1, w_lr, cfg.momentum, cfg.weight_decay);
    sgd_dense(h.w2, v.w2, g.head.w2, w_lr, cfg.momentum, cfg.weight_decay);
    sgd_dense(h.b1, v.b1, g.head.b1, w_lr, cfg.momentum, 0.0);
    sgd_dense(h.b2, v.b2, g.head.b2, w_lr, cfg.momentum, 0.0);
    sgd_dense(h.gamma, v.gamma, g.head.gamma, w_lr, cfg.momentum, 0.0);
    sgd_dense(h.beta, v.beta, g.head.beta, w_lr, cfg.momentum, 0.0);
    update_running_moments(h, g.head_cache);
}

std::uint64_t dropout_stream(int epoch, std::size_t batch) {
    return streams::kDropout + (std::uint64_t{1} << 40) + (static_cast<std::uint64_t>(epoch) << 24) + batch;
}

}  // namespace

void validate_optim(const OptimConfig& cfg) {
    if (!(cfg.position_lr >= 0.0) || !(cfg.weight_lr >= 0.0)) throw ConfigError("learning rates must be >= 0");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (!(cfg.weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(cfg.lr_decay > 0.0) || cfg.lr_step_epochs < 1) throw ConfigError("bad learning-rate schedule");
    if (!(cfg.k_decay > 0.0) || !(cfg.k_min_scale > 0.0)) throw ConfigError("bad k schedule");
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
}

BatchResult compute_batch_gradients(const Network& net, const std::vector<const FeatureMap*>& images,
                                    const std::vector<int>& labels, double k_scale, CounterRng& dropout_rng,
                                    int threads) {
    const std::size_t batch = images.size();
    const int features = net.head().config.inputs;
    std::vector<SampleCache> caches(batch);
    Matrix x(static_cast<Eigen::Index>(batch), features);

    detail::parallel_for(batch, threads, [&](std::size_t s) {
        const FeatureMap f = net.forward_surrogate(*images[s], k_scale, &caches[s]);
        std::copy(f.data().begin(), f.data().end(), x.row(static_cast<Eigen::Index>(s)).data());
    });

    BatchResult r;
    const Matrix logits = mlp_head_forward(net.head(), x, Mode::train, &dropout_rng, &r.head_cache);
    Matrix grad_logits(logits.rows(), logits.cols());
    for (std::size_t s = 0; s < batch; ++s) {
        const auto row = static_cast<Eigen::Index>(s);
        const std::span<const double> z(logits.row(row).data(), static_cast<std::size_t>(logits.cols()));
        const auto lr = softmax_cross_entropy(z, labels[s]);
        if (!std::isfinite(lr.loss)) {
            throw NumericError("non-finite loss (" + std::to_string(lr.loss) + ") at batch sample " +
                               std::to_string(s) + "; lower the learning rates");
        }
        r.loss += lr.loss / static_cast<double>(batch);
        const auto pred = std::max_element(z.begin(), z.end()) - z.begin();
        if (pred != labels[s]) ++r.errors;
        for (Eigen::Index c = 0; c < logits.cols(); ++c)
            grad_logits(row, c) = lr.grad[static_cast<std::size_t>(c)] / static_cast<double>(batch);
    }
    r.head = mlp_head_backward(net.head(), r.head_cache, grad_logits);

    int fc = 0, fh = 0, fw = 0;
    if (net.blocks().empty()) {
        fc = net.config().input.channels;
        fh = net.config().input.height;
        fw = net.config().input.width;
    } else {
        const auto& g = net.blocks().back().geometry;
        fc = g.out_channels;
        fh = g.out_height;
        fw = g.out_width;
    }
    std::vector<StackGradients> per_sample(batch);
    detail::parallel_for(batch, threads, [&](std::size_t s) {
        const auto row = static_cast<Eigen::Index>(s);
        std::vector<double> gf(r.head.input.row(row).data(), r.head.input.row(row).data() + features);
        per_sample[s] = net.backward(caches[s], FeatureMap(fc, fh, fw, std::move(gf)), k_scale);
    });
    r.stack = StackGradients::zeros_like(net.blocks());
    for (const auto& g : per_sample) r.stack.add(g);
    return r;
}

std::vector<EpochMetrics> train(Network& net, const Dataset& data, const OptimConfig& cfg,
                                const EpochCallback& on_epoch) {
    validate_optim(cfg);
    if (data.size() == 0) throw ConfigError("train: empty dataset");
    if (data.images.size() != data.labels.size()) throw ShapeError("train: images/labels length mismatch");

    Velocity velocity(net);
    std::vector<std::size_t> order(data.size());
    std::vector<EpochMetrics> history;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double decay = std::pow(cfg.lr_decay, epoch / cfg.lr_step_epochs);
        const double pos_lr = cfg.position_lr * decay;
        const double w_lr = cfg.weight_lr * decay;
        const double k_scale = std::max(cfg.k_min_scale, std::pow(cfg.k_decay, epoch));

        std::iota(order.begin(), order.end(), std::size_t{0});
        CounterRng shuffle(cfg.seed, streams::kShuffle + static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.uniform_index(i)]);

        EpochMetrics m;
        m.epoch = epoch + 1;
        m.k_scale = k_scale;
        m.position_lr = pos_lr;
        m.weight_lr = w_lr;
        double loss_sum = 0.0;
        std::size_t errors = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const FeatureMap*> images;
            std::vector<int> labels;
            for (std::size_t i = start; i < end; ++i) {
                images.push_back(&data.images[order[i]]);
                labels.push_back(data.labels[order[i]]);
            }
            CounterRng dropout(cfg.seed, dropout_stream(epoch, batch_index));
            const BatchResult g = compute_batch_gradients(net, images, labels, k_scale, dropout, cfg.threads);
            loss_sum += g.loss * static_cast<double>(end - start);
            errors += static_cast<std::size_t>(g.errors);
            apply_step(net, velocity, g, cfg, pos_lr, w_lr);
        }
        m.train_loss = loss_sum / static_cast<double>(data.size());
        m.train_error = static_cast<double>(errors) / static_cast<double>(data.size());
        history.push_back(m);
        if (on_epoch) on_epoch(net, m);
    }
    return history;
}

Confusion confusion_matrix(const Network& net, const Dataset& data, EvalMode mode, int threads) {
    const int classes = net.head().config.classes;
    std::vector<int> predictions(data.size());
    detail::parallel_for(data.size(), threads, [&](std::size_t i) {
        if (mode == EvalMode::hard) {
            predictions[i] = net.predict(data.images[i]);
        } else {
            const Matrix logits =
                mlp_head_forward(net.head(), features_row(net.forward_surrogate(data.images[i])), Mode::eval, nullptr);
            Eigen::Index best = 0;
            logits.row(0).maxCoeff(&best);
            predictions[i] = static_cast<int>(best);
        }
    });
    Confusion counts(static_cast<std::size_t>(classes), std::vector<std::uint64_t>(static_cast<std::size_t>(classes), 0));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int truth = data.labels[i];
        if (truth < 0 || truth >= classes) throw ShapeError("label " + std::to_string(truth) + " out of range");
        ++counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predictions[i])];
    }
    return counts;
}

double evaluate(const Network& net, const Dataset& data, EvalMode mode, int threads) {
    if (data.size() == 0) return 0.0;
    const auto counts = confusion_matrix(net, data, mode, threads);
    std::uint64_t correct = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) correct += counts[c][c];
    return 1.0 - static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace lbpnet
