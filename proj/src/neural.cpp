#include "siim/neural.hpp"

#include "siim/errors.hpp"
#include "siim/hash.hpp"
#include "siim/json_io.hpp"
#include "siim/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace siim {

namespace {

template <class A>
bool same(const A& a, const A& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

}  // namespace

bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return same(a.weight, b.weight) && same(a.bias, b.bias);
}

bool operator==(const MLPParams& a, const MLPParams& b) {
    return a.layer_dims == b.layer_dims && a.activation == b.activation && a.layers == b.layers &&
           same(a.input_shift, b.input_shift) && same(a.input_scale, b.input_scale);
}


namespace {

double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_dims(std::span<const Index> dims) {
    if (dims.size() < 2) throw std::invalid_argument("layer_dims needs at least an input and an output width");
    for (Index d : dims)
        if (d < 1) throw std::invalid_argument("layer_dims entries must be positive");
    if (dims.back() % 2 != 0) throw std::invalid_argument("output width must be even (mean and variance heads)");
}

// Activations kept for the backward pass: inputs[l] feeds layer l, pre[l] is
// its preactivation.
struct Tape {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre;
};

Matrix standardize(const MLPParams& params, const Matrix& features) {
    if (features.rows() != params.input_dim())
        throw std::invalid_argument("feature dimension " + std::to_string(features.rows()) +
                                    " does not match network input " + std::to_string(params.input_dim()));
    return ((features.colwise() - params.input_shift).array().colwise() * params.input_scale.array()).matrix();
}

void apply_activation(Activation act, Matrix& z) {
    if (act == Activation::relu)
        z = z.cwiseMax(0.0);
    else
        z = z.array().tanh().matrix();
}

Matrix run(const MLPParams& params, const Matrix& features, Tape* tape) {
    Matrix a = standardize(params, features);
    const std::size_t n_layers = params.layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& layer = params.layers[l];
        Matrix z = layer.weight * a;
        z.colwise() += layer.bias;
        if (tape) {
            tape->inputs.push_back(std::move(a));
            tape->pre.push_back(z);
        }
        if (l + 1 < n_layers) apply_activation(params.activation, z);
        a = std::move(z);
    }
    return a;
}

BatchHeadOutput heads(const Matrix& out, Index n_links) {
    BatchHeadOutput h{Matrix(n_links, out.cols()), Matrix(n_links, out.cols())};
    for (Index b = 0; b < out.cols(); ++b) {
        for (Index n = 0; n < n_links; ++n) {
            h.mu(n, b) = sigmoid(std::clamp(out(n, b), -kMeanLogitLimit, kMeanLogitLimit));
            h.sigma2(n, b) = softplus(out(n_links + n, b)) + kVarianceFloor;
        }
    }
    return h;
}

Gradients zeros_like(const MLPParams& params) {
    Gradients g;
    g.reserve(params.layers.size());
    for (const auto& layer : params.layers)
        g.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())});
    return g;
}

}  // namespace

std::size_t MLPParams::parameter_count() const {
    std::size_t total = 0;
    for (const auto& layer : layers) total += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    return total;
}

MLPParams init_params(std::span<const Index> layer_dims, std::uint64_t seed, Activation activation) {
    check_dims(layer_dims);
    MLPParams params;
    params.layer_dims.assign(layer_dims.begin(), layer_dims.end());
    params.activation = activation;
    params.input_shift = Vector::Zero(layer_dims.front());
    params.input_scale = Vector::Ones(layer_dims.front());

    Rng rng = make_rng(seed);
    const double gain = activation == Activation::relu ? 2.0 : 1.0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const Index fan_in = layer_dims[l];
        const Index fan_out = layer_dims[l + 1];
        std::normal_distribution<double> normal(0.0, std::sqrt(gain / static_cast<double>(fan_in)));
        DenseLayer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
        for (Index r = 0; r < fan_out; ++r)
            for (Index c = 0; c < fan_in; ++c) layer.weight(r, c) = normal(rng);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

BatchHeadOutput forward_batch(const MLPParams& params, const Matrix& features) {
    return heads(run(params, features, nullptr), params.n_outputs());
}

HeadOutput forward(const MLPParams& params, const Vector& features) {
    auto out = forward_batch(params, features);
    return {out.mu.col(0), out.sigma2.col(0)};
}

double nll_loss(const Vector& mu, const Vector& sigma2, const Vector& target, double c) {
    if (mu.size() != sigma2.size() || mu.size() != target.size() || mu.size() == 0)
        throw std::invalid_argument("nll_loss: mu, sigma2 and target must have equal nonzero length");
    if ((sigma2.array() <= 0.0).any()) throw std::invalid_argument("nll_loss: variance must be positive");
    const auto resid = (target - mu).array();
    const double per_link = (0.5 * sigma2.array().log() + resid.square() / (2.0 * sigma2.array())).sum();
    return per_link / static_cast<double>(mu.size()) + c;
}

LossGrad backward(const MLPParams& params, const Matrix& features, const Matrix& targets, double c) {
    const Index n_links = params.n_outputs();
    const Index batch = features.cols();
    if (batch == 0) throw std::invalid_argument("backward: empty batch");
    if (targets.rows() != n_links || targets.cols() != batch)
        throw std::invalid_argument("backward: target shape does not match network output");

    Tape tape;
    const Matrix out = run(params, features, &tape);
    const BatchHeadOutput h = heads(out, n_links);

    const double scale = 1.0 / static_cast<double>(n_links * batch);
    const Matrix resid = targets - h.mu;
    const auto s = h.sigma2.array();
    LossGrad result;
    result.loss = scale * (0.5 * s.log() + resid.array().square() / (2.0 * s)).sum() + c;

    Matrix delta(out.rows(), batch);
    for (Index b = 0; b < batch; ++b) {
        for (Index n = 0; n < n_links; ++n) {
            const double z_mu = out(n, b);
            const double mu = h.mu(n, b);
            const double var = h.sigma2(n, b);
            const double r = resid(n, b);
            const double dmu = std::abs(z_mu) < kMeanLogitLimit ? mu * (1.0 - mu) : 0.0;
            delta(n, b) = scale * (-r / var) * dmu;
            delta(n_links + n, b) = scale * (0.5 / var - r * r / (2.0 * var * var)) * sigmoid(out(n_links + n, b));
        }
    }

    result.grads = zeros_like(params);
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        result.grads[l].weight.noalias() = delta * tape.inputs[l].transpose();
        result.grads[l].bias = delta.rowwise().sum();
        if (l == 0) break;
        Matrix upstream = params.layers[l].weight.transpose() * delta;
        const Matrix& z = tape.pre[l - 1];
        if (params.activation == Activation::relu)
            delta = (z.array() > 0.0).select(upstream, 0.0);
        else
            delta = (upstream.array() * (1.0 - z.array().tanh().square())).matrix();
    }
    return result;
}

LossGrad backward(const MLPParams& params, std::span<const LabeledSample> batch, double c) {
    if (batch.empty()) throw std::invalid_argument("backward: empty batch");
    Matrix features(params.input_dim(), static_cast<Index>(batch.size()));
    Matrix targets(params.n_outputs(), static_cast<Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].features.size() != features.rows() || batch[i].target.size() != targets.rows())
            throw std::invalid_argument("backward: sample shape does not match network");
        features.col(static_cast<Index>(i)) = batch[i].features;
        targets.col(static_cast<Index>(i)) = batch[i].target;
    }
    return backward(params, features, targets, c);
}

AdamState make_adam_state(const MLPParams& params) {
    return {zeros_like(params), zeros_like(params), 0};
}

void adam_step(MLPParams& params, const Gradients& grads, AdamState& state, const TrainConfig& config) {
    if (grads.size() != params.layers.size() || state.first_moment.size() != params.layers.size())
        throw std::invalid_argument("adam_step: gradient/state layout does not match parameters");
    ++state.step;
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    const double lr = config.learning_rate;
    const double eps = config.adam_eps;

    auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
        m = b1 * m + (1.0 - b1) * g;
        v = (b2 * v.array() + (1.0 - b2) * g.array().square()).matrix();
        theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        update(params.layers[l].weight, grads[l].weight, state.first_moment[l].weight, state.second_moment[l].weight);
        update(params.layers[l].bias, grads[l].bias, state.first_moment[l].bias, state.second_moment[l].bias);
    }
}

namespace {

struct SplitData {
    Matrix features;
    Matrix targets;
};

SplitData gather(std::span<const LabeledSample> data, std::span<const std::size_t> idx) {
    SplitData out{Matrix(data.front().features.size(), static_cast<Index>(idx.size())),
                  Matrix(data.front().target.size(), static_cast<Index>(idx.size()))};
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.features.col(static_cast<Index>(i)) = data[idx[i]].features;
        out.targets.col(static_cast<Index>(i)) = data[idx[i]].target;
    }
    return out;
}

struct Evaluation {
    double nll;
    double mse;
};

Evaluation evaluate(const MLPParams& params, const SplitData& split, double c) {
    const BatchHeadOutput h = forward_batch(params, split.features);
    const auto resid = (split.targets - h.mu).array();
    const double count = static_cast<double>(resid.size());
    const double nll = (0.5 * h.sigma2.array().log() + resid.square() / (2.0 * h.sigma2.array())).sum() / count + c;
    return {nll, resid.square().sum() / count};
}

}  // namespace

TrainResult train(MLPParams params, std::span<const LabeledSample> dataset, const TrainConfig& config) {
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
    if (!(config.learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
    if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    for (const auto& s : dataset)
        if (s.features.size() != params.input_dim() || s.target.size() != params.n_outputs())
            throw std::invalid_argument("train: sample shape does not match network");

    TrainResult result;
    if (config.epochs <= 0) {
        result.params = std::move(params);
        return result;
    }

    Rng rng = make_rng(config.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    const auto n_total = dataset.size();
    std::size_t n_val = n_total >= 10 ? static_cast<std::size_t>(config.validation_fraction * static_cast<double>(n_total)) : 0;
    n_val = std::min(n_val, n_total - 1);
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

    const SplitData train_split = gather(dataset, train_idx);
    const SplitData val_split = n_val > 0 ? gather(dataset, val_idx) : SplitData{};

    if (config.standardize_inputs) {
        const Vector mean = train_split.features.rowwise().mean();
        const Vector var = (train_split.features.colwise() - mean).array().square().rowwise().mean();
        params.input_shift = mean;
        params.input_scale = var.unaryExpr([](double v) { return v > 1e-24 ? 1.0 / std::sqrt(v) : 1.0; });
    }

    AdamState adam = make_adam_state(params);
    const bool early_stop = n_val > 0 && config.stop_metric != StopMetric::none;
    double best_score = std::numeric_limits<double>::infinity();
    MLPParams best = params;
    int since_best = 0;

    const Index n_train = train_split.features.cols();
    std::vector<Index> perm(static_cast<std::size_t>(n_train));
    std::iota(perm.begin(), perm.end(), Index{0});
    Matrix batch_x(params.input_dim(), config.batch_size);
    Matrix batch_y(params.n_outputs(), config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(perm.begin(), perm.end(), rng);
        double loss_sum = 0.0;
        for (Index start = 0; start < n_train; start += config.batch_size) {
            const Index size = std::min(config.batch_size, n_train - start);
            batch_x.resize(Eigen::NoChange, size);
            batch_y.resize(Eigen::NoChange, size);
            for (Index i = 0; i < size; ++i) {
                batch_x.col(i) = train_split.features.col(perm[static_cast<std::size_t>(start + i)]);
                batch_y.col(i) = train_split.targets.col(perm[static_cast<std::size_t>(start + i)]);
            }
            const LossGrad lg = backward(params, batch_x, batch_y, config.nll_constant);
            adam_step(params, lg.grads, adam, config);
            loss_sum += lg.loss * static_cast<double>(size);
        }

        EpochStats stats{epoch, loss_sum / static_cast<double>(n_train), std::numeric_limits<double>::quiet_NaN(),
                         std::numeric_limits<double>::quiet_NaN()};
        if (n_val > 0) {
            const Evaluation ev = evaluate(params, val_split, config.nll_constant);
            stats.val_loss = ev.nll;
            stats.val_mse = ev.mse;
        }
        result.history.push_back(stats);

        if (!early_stop) continue;
        const double score = config.stop_metric == StopMetric::nll ? stats.val_loss : stats.val_mse;
        if (score < best_score) {
            best_score = score;
            best = params;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }

    if (early_stop) {
        result.params = std::move(best);
    } else {
        result.params = std::move(params);
        result.best_epoch = static_cast<int>(result.history.size()) - 1;
    }
    return result;
}

std::string save_model(const MLPParams& params, std::string_view config_hash) {
    return json_io::model_to_json(params, config_hash).dump();
}

MLPParams load_model(std::string_view bytes) {
    return json_io::model_from_json(json_io::parse(bytes, "model"));
}

std::uint64_t fingerprint(const MLPParams& params) {
    Fnv1a h;
    for (Index d : params.layer_dims) h.update(&d, sizeof d);
    for (const auto& layer : params.layers) {
        h.update(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()) * sizeof(double));
        h.update(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()) * sizeof(double));
    }
    h.update(params.input_shift.data(), static_cast<std::size_t>(params.input_shift.size()) * sizeof(double));
    h.update(params.input_scale.data(), static_cast<std::size_t>(params.input_scale.size()) * sizeof(double));
    return h.digest();
}

std::string to_string(Activation activation) {
    return activation == Activation::relu ? "relu" : "tanh";
}

Activation activation_from_string(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string to_string(StopMetric metric) {
    switch (metric) {
        case StopMetric::none: return "none";
        case StopMetric::nll: return "nll";
        case StopMetric::mse: return "mse";
    }
    return "none";
}

StopMetric stop_metric_from_string(std::string_view name) {
    if (name == "none") return StopMetric::none;
    if (name == "nll") return StopMetric::nll;
    if (name == "mse") return StopMetric::mse;
    throw std::invalid_argument("unknown stop metric '" + std::string(name) + "'");
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace siim
