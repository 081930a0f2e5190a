#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lbpnet/random.hpp"

namespace lbpnet {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct HeadConfig {
    int inputs = 0;
    int hidden = 512;
    int classes = 10;
    double dropout = 0.5;        // before fc2
    double input_dropout = 0.5;  // before fc1
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
};

enum class Mode { train, eval };

/// Classifier head: dropout -> fc1 -> batch-norm -> ReLU -> dropout -> fc2.
struct MlpHead {
    HeadConfig config;
    Matrix w1;  // hidden x inputs
    Eigen::VectorXd b1;
    Eigen::VectorXd gamma;
    Eigen::VectorXd beta;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
    Matrix w2;  // classes x hidden
    Eigen::VectorXd b2;

    /// Uniform(+-1/sqrt(fan_in)) affine weights, BN scale 1 / shift 0,
    /// running moments (0, 1).
    static MlpHead init(const HeadConfig& cfg, std::uint64_t seed);
};

void validate_head_config(const HeadConfig& cfg);

/// Intermediates kept by a forward pass for backward and for the running
/// moment update.
struct HeadCache {
    Mode mode = Mode::eval;
    Matrix input_dropped;
    Matrix input_mask;
    Matrix normalized;  // BN output before the affine step
    Eigen::VectorXd batch_mean;
    Eigen::VectorXd batch_var;  // biased
    Eigen::VectorXd inv_std;
    Matrix activated;  // after ReLU
    Matrix hidden_mask;
    Matrix hidden_dropped;
};

/// `features` is batch x inputs. In train mode `dropout_rng` must not be null.
Matrix mlp_head_forward(const MlpHead& head, const Matrix& features, Mode mode, CounterRng* dropout_rng,
                        HeadCache* cache = nullptr);

struct HeadGradients {
    Matrix w1;
    Eigen::VectorXd b1;
    Eigen::VectorXd gamma;
    Eigen::VectorXd beta;
    Matrix w2;
    Eigen::VectorXd b2;
    Matrix input;  // batch x inputs
};

HeadGradients mlp_head_backward(const MlpHead& head, const HeadCache& cache, const Matrix& grad_logits);

/// Folds the batch moments of a train-mode forward into the running moments.
void update_running_moments(MlpHead& head, const HeadCache& cache);

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;  // softmax - onehot
};

/// Log-sum-exp stabilized cross entropy for one sample.
LossResult softmax_cross_entropy(std::span<const double> logits, int label);

}  // namespace lbpnet
