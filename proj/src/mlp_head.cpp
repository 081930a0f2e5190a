#include "lbpnet/mlp_head.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lbpnet/errors.hpp"

namespace lbpnet {

namespace {

Matrix uniform_matrix(int rows, int cols, CounterRng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = bound * (2.0 * rng.uniform01() - 1.0);
    return m;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, CounterRng& rng) {
    Matrix mask(rows, cols);
    const double keep_scale = p < 1.0 ? 1.0 / (1.0 - p) : 0.0;
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform01() >= p ? keep_scale : 0.0;
    return mask;
}

}  // namespace

void validate_head_config(const HeadConfig& cfg) {
    if (cfg.inputs < 1 || cfg.hidden < 1 || cfg.classes < 2) {
        throw ConfigError("head: inputs, hidden and classes must be positive (classes >= 2)");
    }
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0) || !(cfg.input_dropout >= 0.0 && cfg.input_dropout < 1.0)) {
        throw ConfigError("head: dropout rates must be in [0, 1)");
    }
    if (!(cfg.bn_momentum > 0.0 && cfg.bn_momentum <= 1.0)) throw ConfigError("head: bn_momentum must be in (0, 1]");
    if (!(cfg.bn_eps > 0.0)) throw ConfigError("head: bn_eps must be positive");
}

MlpHead MlpHead::init(const HeadConfig& cfg, std::uint64_t seed) {
    validate_head_config(cfg);
    CounterRng rng(seed, streams::kHead);
    MlpHead h;
    h.config = cfg;
    h.w1 = uniform_matrix(cfg.hidden, cfg.inputs, rng);
    h.b1 = Eigen::VectorXd::Zero(cfg.hidden);
    h.gamma = Eigen::VectorXd::Ones(cfg.hidden);
    h.beta = Eigen::VectorXd::Zero(cfg.hidden);
    h.running_mean = Eigen::VectorXd::Zero(cfg.hidden);
    h.running_var = Eigen::VectorXd::Ones(cfg.hidden);
    h.w2 = uniform_matrix(cfg.classes, cfg.hidden, rng);
    h.b2 = Eigen::VectorXd::Zero(cfg.classes);
    return h;
}

Matrix mlp_head_forward(const MlpHead& head, const Matrix& features, Mode mode, CounterRng* dropout_rng,
                        HeadCache* cache) {
    const auto& cfg = head.config;
    if (features.cols() != cfg.inputs) {
        throw ShapeError("mlp head expects " + std::to_string(cfg.inputs) + " features, got " +
                         std::to_string(features.cols()));
    }
    const bool train = mode == Mode::train;
    if (train && !dropout_rng) throw Error("mlp head: train mode needs a dropout generator");
    const Eigen::Index batch = features.rows();

    HeadCache local;
    HeadCache& c = cache ? *cache : local;
    c.mode = mode;

    if (train) {
        c.input_mask = dropout_mask(batch, cfg.inputs, cfg.input_dropout, *dropout_rng);
        c.input_dropped = features.cwiseProduct(c.input_mask);
    } else {
        c.input_dropped = features;
    }

    Matrix hidden = c.input_dropped * head.w1.transpose();
    hidden.rowwise() += head.b1.transpose();

    if (train) {
        c.batch_mean = hidden.colwise().mean().transpose();
        c.batch_var = (hidden.rowwise() - c.batch_mean.transpose()).array().square().colwise().mean().transpose();
        c.inv_std = (c.batch_var.array() + cfg.bn_eps).rsqrt().matrix();
        c.normalized = (hidden.rowwise() - c.batch_mean.transpose()).array().rowwise() * c.inv_std.transpose().array();
    } else {
        c.inv_std = (head.running_var.array() + cfg.bn_eps).rsqrt().matrix();
        c.normalized = (hidden.rowwise() - head.running_mean.transpose()).array().rowwise() *
                       c.inv_std.transpose().array();
    }

    Matrix affine = (c.normalized.array().rowwise() * head.gamma.transpose().array()).matrix();
    affine.rowwise() += head.beta.transpose();
    c.activated = affine.cwiseMax(0.0);

    if (train) {
        c.hidden_mask = dropout_mask(batch, cfg.hidden, cfg.dropout, *dropout_rng);
        c.hidden_dropped = c.activated.cwiseProduct(c.hidden_mask);
    } else {
        c.hidden_dropped = c.activated;
    }

    Matrix logits = c.hidden_dropped * head.w2.transpose();
    logits.rowwise() += head.b2.transpose();
    return logits;
}

HeadGradients mlp_head_backward(const MlpHead& head, const HeadCache& c, const Matrix& grad_logits) {
    const bool train = c.mode == Mode::train;
    const auto batch = static_cast<double>(grad_logits.rows());
    HeadGradients g;

    g.w2 = grad_logits.transpose() * c.hidden_dropped;
    g.b2 = grad_logits.colwise().sum().transpose();
    Matrix d_hidden = grad_logits * head.w2;
    if (train) d_hidden = d_hidden.cwiseProduct(c.hidden_mask);

    // ReLU: pass-through where the activation is strictly positive.
    Matrix d_affine = d_hidden.cwiseProduct((c.activated.array() > 0.0).cast<double>().matrix());
    g.beta = d_affine.colwise().sum().transpose();
    g.gamma = d_affine.cwiseProduct(c.normalized).colwise().sum().transpose();
    Matrix d_norm = (d_affine.array().rowwise() * head.gamma.transpose().array()).matrix();

    Matrix d_pre;
    if (train) {
        const Eigen::RowVectorXd sum_d = d_norm.colwise().sum();
        const Eigen::RowVectorXd sum_dx = d_norm.cwiseProduct(c.normalized).colwise().sum();
        Matrix t = (d_norm * batch).rowwise() - sum_d;
        t -= (c.normalized.array().rowwise() * sum_dx.array()).matrix();
        d_pre = (t.array().rowwise() * (c.inv_std.transpose().array() / batch)).matrix();
    } else {
        d_pre = (d_norm.array().rowwise() * c.inv_std.transpose().array()).matrix();
    }

    g.w1 = d_pre.transpose() * c.input_dropped;
    g.b1 = d_pre.colwise().sum().transpose();
    g.input = d_pre * head.w1;
    if (train) g.input = g.input.cwiseProduct(c.input_mask);
    return g;
}

void update_running_moments(MlpHead& head, const HeadCache& cache) {
    if (cache.mode != Mode::train) return;
    const double m = head.config.bn_momentum;
    const auto batch = static_cast<double>(cache.normalized.rows());
    const double unbias = batch > 1.0 ? batch / (batch - 1.0) : 1.0;
    head.running_mean = (1.0 - m) * head.running_mean + m * cache.batch_mean;
    head.running_var = (1.0 - m) * head.running_var + (m * unbias) * cache.batch_var;
}

LossResult softmax_cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw ShapeError("softmax_cross_entropy: label out of range");
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - mx);
    const double lse = mx + std::log(sum);
    LossResult r;
    r.loss = lse - logits[static_cast<std::size_t>(label)];
    r.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) r.grad[i] = std::exp(logits[i] - lse);
    r.grad[static_cast<std::size_t>(label)] -= 1.0;
    return r;
}

}  // namespace lbpnet
