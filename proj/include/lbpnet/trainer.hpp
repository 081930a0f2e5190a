#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "lbpnet/dataset.hpp"
#include "lbpnet/network.hpp"

namespace lbpnet {

/// SGD with momentum. Pattern offsets get their own learning rate since they
/// move on a pixel scale; every other trainable value uses `weight_lr`.
struct OptimConfig {
    double position_lr = 0.05;
    double weight_lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0;
    int batch_size = 32;
    int epochs = 10;
    /// Learning rates are multiplied by lr_decay every lr_step_epochs epochs.
    double lr_decay = 0.5;
    int lr_step_epochs = 4;
    /// Surrogate temperature multiplier per epoch: max(k_min_scale, k_decay^epoch).
    double k_decay = 1.0;
    double k_min_scale = 1.0;
    std::uint64_t seed = 0;
    int threads = 1;
    friend bool operator==(const OptimConfig&, const OptimConfig&) = default;
};

void validate_optim(const OptimConfig& cfg);

struct EpochMetrics {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_error = 0.0;  // train-mode predictions seen during the epoch
    double k_scale = 1.0;
    double position_lr = 0.0;
    double weight_lr = 0.0;
};

/// Called after each epoch with the updated network.
using EpochCallback = std::function<void(const Network&, const EpochMetrics&)>;

/// Trains in place on `data` only. Deterministic for a given seed regardless
/// of the thread count. Throws NumericError on a non-finite loss.
std::vector<EpochMetrics> train(Network& net, const Dataset& data, const OptimConfig& cfg,
                                const EpochCallback& on_epoch = {});

enum class EvalMode { hard, surrogate };

/// counts[truth][predicted].
using Confusion = std::vector<std::vector<std::uint64_t>>;

Confusion confusion_matrix(const Network& net, const Dataset& data, EvalMode mode = EvalMode::hard,
                           int threads = 1);

/// Top-1 error in [0, 1] with dropout off and running BN moments.
double evaluate(const Network& net, const Dataset& data, EvalMode mode = EvalMode::hard, int threads = 1);

/// Batch-level pieces of one optimizer step, exposed for tests.
struct BatchResult {
    double loss = 0.0;
    int errors = 0;
    StackGradients stack;
    HeadGradients head;
    HeadCache head_cache;
};

BatchResult compute_batch_gradients(const Network& net, const std::vector<const FeatureMap*>& images,
                                    const std::vector<int>& labels, double k_scale, CounterRng& dropout_rng,
                                    int threads = 1);

}  // namespace lbpnet
