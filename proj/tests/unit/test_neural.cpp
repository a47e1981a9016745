#include "siim/errors.hpp"
#include "siim/neural.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace siim;

namespace {

std::vector<LabeledSample> random_batch(Index in, Index out, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01;
    std::vector<LabeledSample> batch(count);
    for (auto& s : batch) {
        s.features = Vector::NullaryExpr(in, [&] { return n01(rng); });
        s.target = Vector::NullaryExpr(out, [&] { return u01(rng); });
    }
    return batch;
}

MLPParams zero_params(std::vector<Index> dims) {
    MLPParams p = init_params(dims, 1);
    for (auto& l : p.layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
    return p;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace

TEST(Init, ShapesAndDeterminism) {
    const std::vector<Index> dims{4, 8, 4};
    const MLPParams a = init_params(dims, 3), b = init_params(dims, 3), c = init_params(dims, 4);
    ASSERT_EQ(a.layers.size(), 2u);
    EXPECT_EQ(a.layers[0].weight.rows(), 8);
    EXPECT_EQ(a.layers[0].weight.cols(), 4);
    EXPECT_EQ(a.layers[1].weight.rows(), 4);
    EXPECT_EQ(a.layers[1].weight.cols(), 8);
    EXPECT_TRUE(a.layers[0].bias.isZero());
    EXPECT_EQ(a, b);
    EXPECT_NE(a.layers[0].weight, c.layers[0].weight);
    EXPECT_EQ(a.input_dim(), 4);
    EXPECT_EQ(a.n_outputs(), 2);
}

TEST(Init, RejectsBadDims) {
    EXPECT_THROW(init_params(std::vector<Index>{4}, 1), std::invalid_argument);
    EXPECT_THROW(init_params(std::vector<Index>{4, 3}, 1), std::invalid_argument);  // odd output width
    EXPECT_THROW(init_params(std::vector<Index>{4, 0, 2}, 1), std::invalid_argument);
}

TEST(Forward, ZeroWeightsClosedForm) {
    const MLPParams p = zero_params({3, 5, 4});
    const HeadOutput out = forward(p, Vector::Ones(3));
    for (Index n = 0; n < 2; ++n) {
        EXPECT_DOUBLE_EQ(out.mu(n), 0.5);
        EXPECT_NEAR(out.sigma2(n), std::log(2.0) + 1e-6, 1e-15);
    }
}

TEST(Forward, OutputRangesOnFuzzedInputs) {
    const MLPParams p = init_params(std::vector<Index>{6, 16, 16, 6}, 2);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n01;
    for (int t = 0; t < 1000; ++t) {
        const double scale = t % 10 == 0 ? 1e4 : 1.0;
        const HeadOutput out = forward(p, Vector::NullaryExpr(6, [&] { return scale * n01(rng); }));
        EXPECT_TRUE((out.mu.array() > 0.0).all() && (out.mu.array() < 1.0).all());
        EXPECT_TRUE((out.sigma2.array() >= kVarianceFloor).all());
    }
}

TEST(Forward, DimensionMismatch) {
    const MLPParams p = init_params(std::vector<Index>{4, 8, 4}, 1);
    EXPECT_THROW(forward(p, Vector::Ones(3)), std::invalid_argument);
    EXPECT_THROW(forward_batch(p, Matrix::Ones(5, 2)), std::invalid_argument);
}

TEST(Forward, BatchMatchesSingle) {
    const MLPParams p = init_params(std::vector<Index>{4, 8, 4}, 1);
    const Matrix x = Matrix::Random(4, 7);
    const BatchHeadOutput b = forward_batch(p, x);
    for (Index c = 0; c < 7; ++c) {
        const HeadOutput s = forward(p, x.col(c));
        EXPECT_LT((b.mu.col(c) - s.mu).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LT((b.sigma2.col(c) - s.sigma2).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Loss, Examples) {
    const Vector t = (Vector(2) << 0.3, 0.8).finished();
    EXPECT_NEAR(nll_loss(t, Vector::Ones(2), t), 0.0, 1e-15);
    EXPECT_NEAR(nll_loss(t.array() + 1.0, Vector::Ones(2), t), 0.5, 1e-15);
    EXPECT_NEAR(nll_loss(t, Vector::Constant(2, std::exp(1.0)), t), 0.5, 1e-15);
    EXPECT_NEAR(nll_loss(t, Vector::Ones(2), t, 0.25), 0.25, 1e-15);
}

TEST(Loss, Errors) {
    const Vector t = Vector::Zero(2);
    EXPECT_THROW(nll_loss(t, Vector::Zero(2), t), std::invalid_argument);
    EXPECT_THROW(nll_loss(t, -Vector::Ones(2), t), std::invalid_argument);
    EXPECT_THROW(nll_loss(t, Vector::Ones(3), t), std::invalid_argument);
}

TEST(Backward, MatchesFiniteDifferencesOnTinyNet) {
    for (Activation act : {Activation::relu, Activation::tanh}) {
        MLPParams p = init_params(std::vector<Index>{4, 8, 4}, 21, act);
        for (auto& l : p.layers) l.bias.setConstant(0.05);
        const auto batch = random_batch(4, 2, 5, 3);
        const LossGrad g = backward(p, batch);
        const double h = 1e-5;
        double worst = 0.0;
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            for (Index i = 0; i < p.layers[l].weight.size(); ++i) {
                MLPParams plus = p, minus = p;
                plus.layers[l].weight.data()[i] += h;
                minus.layers[l].weight.data()[i] -= h;
                const double fd = (backward(plus, batch).loss - backward(minus, batch).loss) / (2 * h);
                const double an = g.grads[l].weight.data()[i];
                worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
            }
            for (Index i = 0; i < p.layers[l].bias.size(); ++i) {
                MLPParams plus = p, minus = p;
                plus.layers[l].bias(i) += h;
                minus.layers[l].bias(i) -= h;
                const double fd = (backward(plus, batch).loss - backward(minus, batch).loss) / (2 * h);
                const double an = g.grads[l].bias(i);
                worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
            }
        }
        EXPECT_LT(worst, 1e-4);
    }
}

TEST(Backward, LossMatchesForward) {
    const MLPParams p = init_params(std::vector<Index>{4, 8, 4}, 2);
    const auto batch = random_batch(4, 2, 3, 4);
    double expected = 0.0;
    for (const auto& s : batch) {
        const HeadOutput o = forward(p, s.features);
        expected += nll_loss(o.mu, o.sigma2, s.target);
    }
    EXPECT_NEAR(backward(p, batch).loss, expected / 3.0, 1e-12);
}

TEST(Backward, DescentDirection) {
    const MLPParams p = init_params(std::vector<Index>{4, 8, 4}, 5);
    const auto batch = random_batch(4, 2, 8, 6);
    const LossGrad g = backward(p, batch);
    MLPParams q = p;
    for (std::size_t l = 0; l < q.layers.size(); ++l) {
        q.layers[l].weight -= 1e-4 * g.grads[l].weight;
        q.layers[l].bias -= 1e-4 * g.grads[l].bias;
    }
    EXPECT_LT(backward(q, batch).loss, g.loss);
}

TEST(Backward, DuplicatedSampleSameGradient) {
    const MLPParams p = init_params(std::vector<Index>{4, 8, 4}, 5);
    const auto one = random_batch(4, 2, 1, 7);
    const std::vector<LabeledSample> two{one[0], one[0]};
    const LossGrad a = backward(p, one), b = backward(p, two);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        EXPECT_LT((a.grads[l].weight - b.grads[l].weight).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LT((a.grads[l].bias - b.grads[l].bias).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Backward, EmptyBatchRejected) {
    const MLPParams p = init_params(std::vector<Index>{4, 8, 4}, 5);
    EXPECT_THROW(backward(p, std::vector<LabeledSample>{}), std::invalid_argument);
}

TEST(Adam, ZeroGradientLeavesParams) {
    MLPParams p = init_params(std::vector<Index>{4, 8, 4}, 5);
    const MLPParams before = p;
    AdamState s = make_adam_state(p);
    Gradients zero = s.first_moment;
    adam_step(p, zero, s, TrainConfig{});
    EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
    MLPParams p = init_params(std::vector<Index>{4, 8, 4}, 5);
    const MLPParams before = p;
    AdamState s = make_adam_state(p);
    Gradients g = s.first_moment;
    for (auto& l : g) {
        l.weight.setConstant(0.37);
        l.bias.setConstant(0.37);
    }
    TrainConfig cfg;
    adam_step(p, g, s, cfg);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const Matrix dw = before.layers[l].weight - p.layers[l].weight;
        EXPECT_NEAR(dw.maxCoeff(), cfg.learning_rate, 1e-9);
        EXPECT_NEAR(dw.minCoeff(), cfg.learning_rate, 1e-9);
    }
}

TEST(Adam, LossDecreasesOverFirstSteps) {
    MLPParams p = init_params(std::vector<Index>{4, 16, 4}, 9);
    const auto batch = random_batch(4, 2, 32, 10);
    AdamState s = make_adam_state(p);
    double prev = backward(p, batch).loss;
    for (int step = 0; step < 10; ++step) {
        adam_step(p, backward(p, batch).grads, s, TrainConfig{});
        const double now = backward(p, batch).loss;
        EXPECT_LE(now, prev + 1e-12);
        prev = now;
    }
}

TEST(Train, Deterministic) {
    const auto data = random_batch(4, 2, 60, 11);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.seed = 5;
    const MLPParams init = init_params(std::vector<Index>{4, 8, 4}, 1);
    EXPECT_EQ(train(init, data, cfg).params, train(init, data, cfg).params);
}

TEST(Train, ZeroEpochsReturnsParamsUnchanged) {
    const auto data = random_batch(4, 2, 20, 11);
    TrainConfig cfg;
    cfg.epochs = 0;
    const MLPParams init = init_params(std::vector<Index>{4, 8, 4}, 1);
    EXPECT_EQ(train(init, data, cfg).params, init);
}

TEST(Train, EmptyDatasetAndBadConfigRejected) {
    const MLPParams init = init_params(std::vector<Index>{4, 8, 4}, 1);
    EXPECT_THROW(train(init, std::vector<LabeledSample>{}, TrainConfig{}), std::invalid_argument);
    TrainConfig bad;
    bad.learning_rate = 0.0;
    EXPECT_THROW(train(init, random_batch(4, 2, 5, 1), bad), std::invalid_argument);
    bad = TrainConfig{};
    bad.batch_size = 0;
    EXPECT_THROW(train(init, random_batch(4, 2, 5, 1), bad), std::invalid_argument);
}

TEST(Train, ConstantTargetSanityTask) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<LabeledSample> data(1000);
    for (auto& s : data) s = {Vector::Constant(1, u(rng)), Vector::Constant(1, 0.7)};
    TrainConfig cfg;
    cfg.epochs = 100;
    cfg.batch_size = 50;
    cfg.seed = 3;
    cfg.stop_metric = StopMetric::none;
    const MLPParams p = train(init_params(std::vector<Index>{1, 16, 16, 2}, 4), data, cfg).params;
    std::vector<double> s2;
    for (int i = 0; i < 200; ++i) {
        const HeadOutput o = forward(p, data[i].features);
        EXPECT_NEAR(o.mu(0), 0.7, 0.02);
        s2.push_back(o.sigma2(0));
    }
    EXPECT_LT(median(s2), 0.05);
}

TEST(Train, HeteroscedasticNoiseRecovered) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n01;
    std::vector<LabeledSample> data(4000);
    for (auto& s : data) {
        s.features = Vector::NullaryExpr(2, [&] { return n01(rng); });
        const double mean = 0.5 + 0.15 * std::tanh(s.features(0));
        s.target = Vector::Constant(1, mean + 0.1 * n01(rng));
    }
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.seed = 2;
    cfg.stop_metric = StopMetric::nll;
    const MLPParams p = train(init_params(std::vector<Index>{2, 32, 32, 2}, 6), data, cfg).params;
    std::vector<double> sd;
    for (int i = 0; i < 500; ++i) sd.push_back(std::sqrt(forward(p, data[i].features).sigma2(0)));
    const double m = median(sd);
    EXPECT_GE(m, 0.05);
    EXPECT_LE(m, 0.2);
}

TEST(Train, HistoryAndEarlyStopping) {
    const auto data = random_batch(4, 2, 200, 14);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.patience = 3;
    cfg.seed = 1;
    const TrainResult r = train(init_params(std::vector<Index>{4, 32, 4}, 1), data, cfg);
    ASSERT_FALSE(r.history.empty());
    EXPECT_LT(r.history.size(), 200u);  // noise targets: validation error stops improving
    EXPECT_GE(r.best_epoch, 0);
    for (const auto& e : r.history) EXPECT_TRUE(std::isfinite(e.val_mse));
}

TEST(Serialization, RoundTripIsExact) {
    MLPParams p = init_params(std::vector<Index>{4, 8, 4}, 5, Activation::tanh);
    p.input_shift.setConstant(0.1234567890123);
    p.input_scale.setConstant(3.0 / 7.0);
    const MLPParams q = load_model(save_model(p, "abc"));
    EXPECT_EQ(p, q);
    EXPECT_EQ(fingerprint(p), fingerprint(q));
}

TEST(Serialization, TruncatedInputIsFormatError) {
    const std::string bytes = save_model(init_params(std::vector<Index>{4, 8, 4}, 5));
    for (std::size_t cut : {std::size_t{0}, std::size_t{1}, bytes.size() / 2, bytes.size() - 1})
        EXPECT_THROW(load_model(bytes.substr(0, cut)), FormatError);
}

TEST(Serialization, VersionMismatch) {
    std::string bytes = save_model(init_params(std::vector<Index>{4, 8, 4}, 5));
    const auto pos = bytes.find("\"version\":1");
    ASSERT_NE(pos, std::string::npos);
    bytes.replace(pos, 11, "\"version\":9");
    EXPECT_THROW(load_model(bytes), VersionError);
}

TEST(Serialization, ShapeMismatchRejected) {
    std::string bytes = save_model(init_params(std::vector<Index>{4, 8, 4}, 5));
    const auto pos = bytes.find("\"layer_dims\":[4,8,4]");
    ASSERT_NE(pos, std::string::npos);
    bytes.replace(pos, 20, "\"layer_dims\":[4,9,4]");
    EXPECT_THROW(load_model(bytes), FormatError);
}

TEST(Names, RoundTrip) {
    EXPECT_EQ(activation_from_string(to_string(Activation::tanh)), Activation::tanh);
    EXPECT_EQ(stop_metric_from_string(to_string(StopMetric::mse)), StopMetric::mse);
    EXPECT_THROW(activation_from_string("gelu"), std::invalid_argument);
}
