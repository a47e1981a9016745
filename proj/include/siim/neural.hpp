#pragma once

#include "siim/netsim.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace siim {

enum class Activation { relu, tanh };

/// Fully connected layer, weight is (out x in).
struct DenseLayer {
    Matrix weight;
    Vector bias;
};

/// Exact comparison; shapes must match too.
bool operator==(const DenseLayer& a, const DenseLayer& b);

/// Feed-forward regressor with 2N outputs: rows [0, N) drive the mean head,
/// rows [N, 2N) the variance head. Inputs are standardized as
/// (x - input_shift) .* input_scale before the first layer.
struct MLPParams {
    std::vector<Index> layer_dims;
    Activation activation = Activation::relu;
    std::vector<DenseLayer> layers;
    Vector input_shift;
    Vector input_scale;

    Index input_dim() const { return layer_dims.front(); }
    Index n_outputs() const { return layer_dims.back() / 2; }
    std::size_t parameter_count() const;

    friend bool operator==(const MLPParams& a, const MLPParams& b);
};

inline constexpr double kVarianceFloor = 1e-6;

// Mean-head preactivations are clamped to this magnitude so that the squashed
// mean stays strictly inside (0, 1) in double precision.
inline constexpr double kMeanLogitLimit = 30.0;

struct HeadOutput {
    Vector mu;
    Vector sigma2;
};

// Column b holds sample b.
struct BatchHeadOutput {
    Matrix mu;
    Matrix sigma2;
};

struct LabeledSample {
    Vector features;
    Vector target;  // p* / p_max, in [0, 1]^N
};

using Gradients = std::vector<DenseLayer>;

struct LossGrad {
    double loss = 0.0;
    Gradients grads;
};

/// He/LeCun-style normal init scaled by fan-in; zero biases; identity input
/// standardization.
MLPParams init_params(std::span<const Index> layer_dims, std::uint64_t seed, Activation activation = Activation::relu);

HeadOutput forward(const MLPParams& params, const Vector& features);
BatchHeadOutput forward_batch(const MLPParams& params, const Matrix& features);

/// Mean over links of log(sigma2)/2 + (target - mu)^2 / (2 sigma2), plus c.
double nll_loss(const Vector& mu, const Vector& sigma2, const Vector& target, double c = 0.0);

/// Loss and exact gradients of the batch-mean nll_loss.
LossGrad backward(const MLPParams& params, std::span<const LabeledSample> batch, double c = 0.0);
LossGrad backward(const MLPParams& params, const Matrix& features, const Matrix& targets, double c = 0.0);

enum class StopMetric { none, nll, mse };

struct TrainConfig {
    double learning_rate = 1e-3;
    Index batch_size = 100;
    int epochs = 100;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double nll_constant = 0.0;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;
    int patience = 10;
    StopMetric stop_metric = StopMetric::mse;
    bool standardize_inputs = true;
};

struct AdamState {
    Gradients first_moment;
    Gradients second_moment;
    long long step = 0;
};

AdamState make_adam_state(const MLPParams& params);

void adam_step(MLPParams& params, const Gradients& grads, AdamState& state, const TrainConfig& config);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;  // NaN when no validation split
    double val_mse = 0.0;
};

struct TrainResult {
    MLPParams params;
    std::vector<EpochStats> history;
    int best_epoch = -1;
};

/// Shuffled mini-batch Adam on the NLL loss. A validation_fraction split is
/// held out for reporting and early stopping; the best epoch's parameters
/// are returned.
TrainResult train(MLPParams params, std::span<const LabeledSample> dataset, const TrainConfig& config);

inline constexpr int kModelFormatVersion = 1;

std::string save_model(const MLPParams& params, std::string_view config_hash = {});
MLPParams load_model(std::string_view bytes);

std::uint64_t fingerprint(const MLPParams& params);

std::string to_string(Activation activation);
Activation activation_from_string(std::string_view name);
std::string to_string(StopMetric metric);
StopMetric stop_metric_from_string(std::string_view name);

}  // namespace siim
