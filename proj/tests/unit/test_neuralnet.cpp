#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cavsense/errors.hpp"
#include "cavsense/neuralnet.hpp"
#include "cavsense/rng.hpp"

using namespace cavsense;

namespace {

Architecture small_arch() {
    Architecture a;
    a.input_length = 40;
    a.conv1_channels = 4;
    a.conv1_kernel = 5;
    a.conv2_channels = 6;
    a.conv2_kernel = 3;
    a.fc_hidden = 8;
    return a;
}

FeatureTensor random_input(std::size_t length, std::uint64_t seed) {
    SplitMix64 rng(seed);
    FeatureTensor x{length, std::vector<double>(kFeatureChannels * length)};
    for (auto& v : x.values) v = rng.uniform(-1.0, 1.0);
    return x;
}

FeatureMap map_of(std::size_t c, std::vector<double> v) {
    FeatureMap m(c, v.size() / c);
    m.data = std::move(v);
    return m;
}

// Straight-line reference forward pass, loops written from the layer formulas.
double reference_forward(const FeatureTensor& x, const ModelParams& p) {
    const Architecture& a = p.arch;
    auto conv = [](const std::vector<std::vector<double>>& in, const Conv1DLayer& l) {
        const std::size_t len = (in[0].size() - l.kernel_size) / l.stride + 1;
        std::vector<std::vector<double>> out(l.out_channels, std::vector<double>(len));
        for (std::size_t o = 0; o < l.out_channels; ++o) {
            for (std::size_t t = 0; t < len; ++t) {
                double s = l.bias[o];
                for (std::size_t c = 0; c < l.in_channels; ++c) {
                    for (std::size_t k = 0; k < l.kernel_size; ++k) s += l.w(o, c, k) * in[c][t * l.stride + k];
                }
                out[o][t] = std::max(0.0, s);
            }
        }
        return out;
    };
    auto pool = [&](const std::vector<std::vector<double>>& in) {
        std::vector<std::vector<double>> out(in.size());
        for (std::size_t c = 0; c < in.size(); ++c) {
            for (std::size_t t = 0; t + a.pool <= in[c].size(); t += a.pool) {
                out[c].push_back(*std::max_element(in[c].begin() + t, in[c].begin() + t + a.pool));
            }
        }
        return out;
    };
    std::vector<std::vector<double>> in(a.input_channels);
    for (std::size_t c = 0; c < a.input_channels; ++c) in[c].assign(x.channel(c).begin(), x.channel(c).end());
    const auto h2 = pool(conv(pool(conv(in, p.conv1)), p.conv2));
    std::vector<double> flat;
    for (const auto& row : h2) flat.insert(flat.end(), row.begin(), row.end());
    double logit = p.fc2.bias[0];
    for (std::size_t j = 0; j < p.fc1.out_features; ++j) {
        double s = p.fc1.bias[j];
        for (std::size_t i = 0; i < flat.size(); ++i) s += p.fc1.weights[j * flat.size() + i] * flat[i];
        logit += p.fc2.weights[j] * std::max(0.0, s);
    }
    return 1.0 / (1.0 + std::exp(-logit));
}

}  // namespace

TEST(Conv1D, Examples) {
    Conv1DLayer diff(1, 1, 3);
    diff.weights = {1.0, 0.0, -1.0};
    const auto out = conv1d_forward(map_of(1, {1.0, 2.0, 3.0}), diff);
    ASSERT_EQ(out.length, 1u);
    EXPECT_EQ(out.data[0], -2.0);

    Conv1DLayer id(1, 1, 1);
    id.weights = {1.0};
    EXPECT_EQ(conv1d_forward(map_of(1, {4.0, -1.0, 2.5}), id).data, (std::vector<double>{4.0, -1.0, 2.5}));

    Conv1DLayer zero(2, 1, 2);
    zero.bias = {0.75, -1.0};
    EXPECT_EQ(conv1d_forward(map_of(1, {4.0, -1.0, 2.5}), zero).data, (std::vector<double>{0.75, 0.75, -1.0, -1.0}));

    Conv1DLayer strided(1, 1, 2, 2);
    strided.weights = {1.0, 1.0};
    EXPECT_EQ(conv1d_forward(map_of(1, {1.0, 2.0, 3.0, 4.0, 5.0}), strided).data, (std::vector<double>{3.0, 7.0}));

    EXPECT_THROW(conv1d_forward(map_of(2, {1.0, 2.0}), diff), shape_error);
    EXPECT_THROW(conv1d_forward(map_of(1, {1.0, 2.0}), diff), shape_error);
}

TEST(Activations, ReluAndSigmoid) {
    EXPECT_EQ(relu(-3.0), 0.0);
    EXPECT_EQ(relu(2.0), 2.0);
    EXPECT_EQ(sigmoid(0.0), 0.5);
    SplitMix64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(-40.0, 40.0);
        EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-15);
    }
    EXPECT_GT(sigmoid(-700.0), 0.0);
    EXPECT_LT(sigmoid(30.0), 1.0);
    EXPECT_FALSE(std::isnan(sigmoid(-1e308)));
}

TEST(MaxPool, Examples) {
    const auto r = maxpool_forward(map_of(1, {1.0, 3.0, 2.0, 5.0}), 2);
    EXPECT_EQ(r.output.data, (std::vector<double>{3.0, 5.0}));
    EXPECT_EQ(r.argmax, (std::vector<std::size_t>{1, 3}));

    const auto id = maxpool_forward(map_of(1, {1.0, 3.0, 2.0}), 1);
    EXPECT_EQ(id.output.data, (std::vector<double>{1.0, 3.0, 2.0}));

    const auto tie = maxpool_forward(map_of(1, {2.0, 2.0}), 2);
    EXPECT_EQ(tie.output.data, (std::vector<double>{2.0}));
    EXPECT_EQ(tie.argmax, (std::vector<std::size_t>{0}));

    // Odd remainder dropped; second channel indexes into the flat input.
    const auto two = maxpool_forward(map_of(2, {1.0, 0.0, 9.0, 4.0, 7.0, 8.0}), 2);
    EXPECT_EQ(two.output.data, (std::vector<double>{1.0, 7.0}));
    EXPECT_EQ(two.argmax, (std::vector<std::size_t>{0, 4}));
}

TEST(Architecture, DefaultShapes) {
    const Architecture a;
    EXPECT_EQ(a.conv1_length(), 996u);
    EXPECT_EQ(a.pool1_length(), 498u);
    EXPECT_EQ(a.conv2_length(), 494u);
    EXPECT_EQ(a.pool2_length(), 247u);
    EXPECT_EQ(a.flattened_length(), 15808u);
    Architecture tiny;
    tiny.input_length = 10;
    EXPECT_THROW(tiny.validate(), shape_error);
}

TEST(ModelForward, ZeroParametersGiveHalf) {
    const ModelParams p(Architecture{});
    EXPECT_EQ(model_forward(random_input(kDefaultPoints, 3), p).prediction, 0.5);
}

TEST(ModelForward, MatchesReferenceImplementation) {
    const Architecture a = small_arch();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ModelParams p = init_params(seed, a);
        SplitMix64 rng(seed + 50);
        for (auto b : p.blocks()) {
            if (b.name.ends_with("bias")) {
                for (double& v : b.values) v = rng.uniform(-0.1, 0.1);
            }
        }
        const auto x = random_input(a.input_length, seed);
        EXPECT_NEAR(model_forward(x, p).prediction, reference_forward(x, p), 1e-13);
    }
}

TEST(ModelForward, DefaultArchitectureMatchesReference) {
    const ModelParams p = init_params(9);
    const auto x = random_input(kDefaultPoints, 9);
    const double y = model_forward(x, p).prediction;
    EXPECT_GT(y, 0.0);
    EXPECT_LT(y, 1.0);
    EXPECT_NEAR(y, reference_forward(x, p), 1e-12);
    EXPECT_EQ(y, model_forward(x, p).prediction);
}

TEST(ModelForward, WrongInputLengthIsShapeError) {
    const ModelParams p = init_params(1, small_arch());
    EXPECT_THROW(model_forward(random_input(41, 1), p), shape_error);
}

TEST(BatchForward, BitIdenticalToSequential) {
    const Architecture a = small_arch();
    const ModelParams p = init_params(4, a);
    std::vector<FeatureTensor> xs;
    for (std::uint64_t s = 0; s < 7; ++s) xs.push_back(random_input(a.input_length, 100 + s));
    std::vector<const FeatureTensor*> ptrs;
    for (const auto& x : xs) ptrs.push_back(&x);
    const auto batch = batch_forward(ptrs, p);
    ASSERT_EQ(batch.size(), xs.size());

    ModelParams g_seq(a);
    ModelParams g_batch(a);
    std::vector<const ForwardCache*> caches;
    std::vector<double> d;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto single = model_forward(xs[i], p);
        EXPECT_EQ(batch[i].prediction, single.prediction);
        accumulate_backward(single.cache, p, 0.1 * (i + 1), g_seq);
        caches.push_back(&batch[i].cache);
        d.push_back(0.1 * (i + 1));
    }
    batch_accumulate_backward(caches, p, d, g_batch);
    EXPECT_TRUE(g_seq == g_batch);
}

TEST(ModelBackward, ZeroUpstreamGivesZeroGradient) {
    const Architecture a = small_arch();
    const ModelParams p = init_params(2, a);
    const auto r = model_forward(random_input(a.input_length, 2), p);
    const ModelParams g = model_backward(r.cache, p, 0.0);
    for (const auto& b : g.blocks()) {
        for (double v : b.values) EXPECT_EQ(v, 0.0);
    }
}

TEST(ModelBackward, StaleCacheIsStateError) {
    const ModelParams p = init_params(2, small_arch());
    Architecture other = small_arch();
    other.fc_hidden = 9;
    const ModelParams q = init_params(2, other);
    const auto r = model_forward(random_input(40, 2), p);
    EXPECT_THROW(model_backward(r.cache, q, 1.0), state_error);
}

TEST(MseLoss, Examples) {
    const std::vector<double> a{0.3, 0.7};
    const auto same = mse_loss(a, a);
    EXPECT_EQ(same.loss, 0.0);
    EXPECT_EQ(same.gradient, (std::vector<double>{0.0, 0.0}));

    const auto one = mse_loss(std::vector{1.0}, std::vector{0.0});
    EXPECT_EQ(one.loss, 1.0);
    EXPECT_EQ(one.gradient, (std::vector<double>{2.0}));

    EXPECT_EQ(mse_loss(std::vector{0.5, 0.5}, std::vector{0.0, 1.0}).loss, 0.25);
    EXPECT_THROW(mse_loss(std::vector{0.5}, std::vector{0.0, 1.0}), validation_error);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    const Architecture a = small_arch();
    ModelParams p = init_params(3, a);
    const ModelParams before = p;
    ModelParams g(a);
    SplitMix64 rng(3);
    for (auto b : g.blocks()) {
        for (double& v : b.values) v = rng.uniform(-2.0, 2.0);
    }
    AdamState st(p, {.lr = 1e-3});
    adam_step(p, g, st);
    EXPECT_EQ(st.t, 1u);
    const auto pb = p.blocks();
    const auto bb = before.blocks();
    const auto gb = g.blocks();
    for (std::size_t k = 0; k < kParamBlocks; ++k) {
        for (std::size_t i = 0; i < pb[k].values.size(); ++i) {
            const double gi = gb[k].values[i];
            // m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps).
            const double expect = -1e-3 * gi / (std::abs(gi) + 1e-8);
            EXPECT_NEAR(pb[k].values[i] - bb[k].values[i], expect, 1e-6 * 1e-3);
        }
    }
}

TEST(Adam, ZeroGradientAndDeterminism) {
    const Architecture a = small_arch();
    ModelParams p = init_params(3, a);
    const ModelParams before = p;
    AdamState st(p, {});
    adam_step(p, ModelParams(a), st);
    EXPECT_TRUE(p == before);

    ModelParams g = init_params(8, a);
    ModelParams p1 = before;
    ModelParams p2 = before;
    AdamState s1(p1, {});
    AdamState s2(p2, {});
    for (int i = 0; i < 3; ++i) {
        adam_step(p1, g, s1);
        adam_step(p2, g, s2);
    }
    EXPECT_TRUE(p1 == p2);
}

TEST(Adam, NonFiniteGradientLeavesStateUntouched) {
    const Architecture a = small_arch();
    ModelParams p = init_params(3, a);
    const ModelParams before = p;
    ModelParams g(a);
    g.fc1.weights[5] = std::nan("");
    AdamState st(p, {});
    try {
        adam_step(p, g, st);
        FAIL() << "expected numeric_error";
    } catch (const numeric_error& e) {
        EXPECT_NE(std::string(e.what()).find("fc1.weight"), std::string::npos);
    }
    EXPECT_TRUE(p == before);
    EXPECT_EQ(st.t, 0u);
}

TEST(InitParams, DeterministicWithZeroBiases) {
    const auto a = init_params(5);
    EXPECT_TRUE(a == init_params(5));
    EXPECT_FALSE(a == init_params(6));
    for (const auto& b : a.blocks()) {
        if (b.name.ends_with("bias")) {
            for (double v : b.values) EXPECT_EQ(v, 0.0);
        }
    }
    // He-uniform bound for conv1: sqrt(6 / fan_in).
    const double bound = std::sqrt(6.0 / (8.0 * 7.0));
    for (double v : a.conv1.weights) EXPECT_LE(std::abs(v), bound);
    EXPECT_EQ(a.parameter_count(), 8u * 32 * 7 + 32 + 32u * 64 * 5 + 64 + 15808u * 128 + 128 + 128 + 1);
}

TEST(GradientCheck, PassesOnSmallAndDefaultNetworks) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Architecture a = small_arch();
        const auto r = gradient_check(init_params(seed, a), random_input(a.input_length, seed), 0.3, 1e-5);
        EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
        EXPECT_GT(r.checked, 0u);
    }
    const auto r = gradient_check(init_params(11), random_input(kDefaultPoints, 11), 0.7, 1e-5);
    EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(GradientCheck, DetectsCorruptedConv2Gradient) {
    const Architecture a = small_arch();
    GradientCheckOptions opt;
    opt.conv2_gradient_scale = 2.0;
    const auto r = gradient_check(init_params(1, a), random_input(a.input_length, 1), 0.3, 1e-5, opt);
    EXPECT_GE(r.max_relative_error, 0.4);
    EXPECT_GE(r.block_max[2], 0.4);
    EXPECT_LT(r.block_max[4], 1e-4);
}

TEST(GradientCheck, ZeroParametersAtHalfTarget) {
    const ModelParams p(small_arch());
    const auto r = gradient_check(p, random_input(40, 4), 0.5, 1e-5);
    EXPECT_LT(r.max_relative_error, 1e-8);
}

TEST(Training, AdamFitsTenSamples) {
    const Architecture a = small_arch();
    ModelParams p = init_params(12, a);
    std::vector<FeatureTensor> xs;
    std::vector<double> targets;
    SplitMix64 rng(12);
    for (std::uint64_t s = 0; s < 10; ++s) {
        xs.push_back(random_input(a.input_length, 200 + s));
        targets.push_back(rng.uniform(0.1, 0.9));
    }
    std::vector<const FeatureTensor*> ptrs;
    for (const auto& x : xs) ptrs.push_back(&x);

    auto loss_now = [&] {
        std::vector<double> pred;
        for (const auto& r : batch_forward(ptrs, p)) pred.push_back(r.prediction);
        return mse_loss(pred, targets).loss;
    };
    const double initial = loss_now();
    AdamState st(p, {.lr = 1e-3});
    for (int step = 0; step < 100; ++step) {
        const auto fwd = batch_forward(ptrs, p);
        std::vector<double> pred;
        std::vector<const ForwardCache*> caches;
        for (const auto& r : fwd) {
            pred.push_back(r.prediction);
            caches.push_back(&r.cache);
        }
        const auto l = mse_loss(pred, targets);
        ModelParams g(a);
        batch_accumulate_backward(caches, p, l.gradient, g);
        adam_step(p, g, st);
    }
    EXPECT_LT(loss_now(), initial / 10.0);
}
