#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "cavsense/sparams.hpp"

namespace cavsense {

// Layer sizes of the regressor
//   conv1 -> ReLU -> maxpool -> conv2 -> ReLU -> maxpool -> flatten
//   -> fc1 -> ReLU -> fc2 -> sigmoid
// Convolutions are valid-mode cross-correlations.
struct Architecture {
    std::size_t input_channels = kFeatureChannels;
    std::size_t input_length = kDefaultPoints;
    std::size_t conv1_channels = 32;
    std::size_t conv1_kernel = 7;
    std::size_t conv2_channels = 64;
    std::size_t conv2_kernel = 5;
    std::size_t stride = 1;
    std::size_t pool = 2;
    std::size_t fc_hidden = 128;

    std::size_t conv1_length() const;
    std::size_t pool1_length() const;
    std::size_t conv2_length() const;
    std::size_t pool2_length() const;
    std::size_t flattened_length() const;

    // Throws shape_error naming the first stage that collapses to zero length.
    void validate() const;

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Channel-major activation map [channels, length].
struct FeatureMap {
    std::size_t channels = 0;
    std::size_t length = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(std::size_t c, std::size_t l, double fill = 0.0) : channels(c), length(l), data(c * l, fill) {}

    double& at(std::size_t c, std::size_t t) { return data[c * length + t]; }
    double at(std::size_t c, std::size_t t) const { return data[c * length + t]; }
    double* row(std::size_t c) { return data.data() + c * length; }
    const double* row(std::size_t c) const { return data.data() + c * length; }
};

FeatureMap to_feature_map(const FeatureTensor& x);

struct Conv1DLayer {
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::size_t kernel_size = 1;
    std::size_t stride = 1;
    std::vector<double> weights;  // [out, in, kernel]
    std::vector<double> bias;     // [out]

    Conv1DLayer() = default;
    Conv1DLayer(std::size_t out, std::size_t in, std::size_t kernel, std::size_t stride_ = 1);

    double& w(std::size_t o, std::size_t c, std::size_t k) { return weights[(o * in_channels + c) * kernel_size + k]; }
    double w(std::size_t o, std::size_t c, std::size_t k) const {
        return weights[(o * in_channels + c) * kernel_size + k];
    }

    friend bool operator==(const Conv1DLayer&, const Conv1DLayer&) = default;
};

struct DenseLayer {
    std::size_t out_features = 0;
    std::size_t in_features = 0;
    std::vector<double> weights;  // [out, in]
    std::vector<double> bias;     // [out]

    DenseLayer() = default;
    DenseLayer(std::size_t out, std::size_t in);

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ParamBlock {
    std::string_view name;
    std::span<double> values;
};

struct ConstParamBlock {
    std::string_view name;
    std::span<const double> values;
};

inline constexpr std::size_t kParamBlocks = 8;

// All weights and biases. Gradients and Adam moments use the same type, so
// every consumer walks the blocks in one declaration order:
// conv1.weight, conv1.bias, conv2.weight, conv2.bias, fc1.weight, fc1.bias,
// fc2.weight, fc2.bias.
struct ModelParams {
    Architecture arch;
    Conv1DLayer conv1;
    Conv1DLayer conv2;
    DenseLayer fc1;
    DenseLayer fc2;

    ModelParams() = default;
    // Zero-filled parameters for `arch` (validated).
    explicit ModelParams(const Architecture& arch);

    std::array<ParamBlock, kParamBlocks> blocks();
    std::array<ConstParamBlock, kParamBlocks> blocks() const;
    std::size_t parameter_count() const;
    void set_zero();
    bool same_shape(const ModelParams& other) const noexcept;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// out[o, t] = bias[o] + sum_{c,k} w[o, c, k] * in[c, t * stride + k]
FeatureMap conv1d_forward(const FeatureMap& input, const Conv1DLayer& layer);

inline double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }
double sigmoid(double x) noexcept;

struct PoolResult {
    FeatureMap output;
    std::vector<std::size_t> argmax;  // flat input index per output element
};

// Non-overlapping windows, trailing remainder dropped, ties to lowest index.
PoolResult maxpool_forward(const FeatureMap& input, std::size_t pool);

// Everything backprop needs from one forward pass.
struct ForwardCache {
    Architecture arch;
    FeatureMap input;
    FeatureMap conv1_pre;  // before ReLU
    PoolResult pool1;      // pool(relu(conv1_pre))
    FeatureMap conv2_pre;
    PoolResult pool2;      // flattened row-major into fc1
    std::vector<double> fc1_pre;
    std::vector<double> fc1_act;
    double logit = 0.0;
    double prediction = 0.0;
};

struct ForwardResult {
    double prediction = 0.0;
    ForwardCache cache;
};

ForwardResult model_forward(const FeatureTensor& x, const ModelParams& p);
double predict(const FeatureTensor& x, const ModelParams& p);

// Forward pass over a batch. Bit-identical to model_forward per sample; the
// fc1 weights are streamed once for the whole batch.
std::vector<ForwardResult> batch_forward(std::span<const FeatureTensor* const> xs, const ModelParams& p);

// Gradients of d_loss_d_pred * prediction with respect to every parameter.
ModelParams model_backward(const ForwardCache& cache, const ModelParams& p, double d_loss_d_pred);
// Same, accumulated into `grads` (for batch sums).
void accumulate_backward(const ForwardCache& cache, const ModelParams& p, double d_loss_d_pred, ModelParams& grads);
// Bit-identical to calling accumulate_backward for each sample in order.
void batch_accumulate_backward(std::span<const ForwardCache* const> caches, const ModelParams& p,
                               std::span<const double> d_loss_d_pred, ModelParams& grads);

struct LossResult {
    double loss = 0.0;
    std::vector<double> gradient;  // d loss / d pred_i
};

// loss = mean((pred - target)^2), d_i = 2 (pred_i - target_i) / N.
LossResult mse_loss(std::span<const double> pred, std::span<const double> target);

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

struct AdamState {
    AdamHyper hyper;
    ModelParams m;
    ModelParams v;
    std::uint64_t t = 0;

    AdamState() = default;
    AdamState(const ModelParams& shape, AdamHyper h);
};

// Bias-corrected Adam update. All gradients are checked for finiteness before
// any parameter changes; a non-finite entry throws numeric_error naming the
// block and leaves params and state untouched.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state);

// He-uniform for conv1, conv2, fc1 (ReLU-fed), Xavier-uniform for fc2, zero
// biases. Deterministic in seed.
ModelParams init_params(std::uint64_t seed, const Architecture& arch = {});

struct GradientCheckOptions {
    std::size_t samples_per_block = 200;
    std::uint64_t subsample_seed = 0x5eed;
    // Test hook: scales the analytic conv2 gradients before comparison.
    double conv2_gradient_scale = 1.0;
};

struct GradientCheckResult {
    double max_relative_error = 0.0;
    std::array<double, kParamBlocks> block_max{};
    std::size_t checked = 0;
    // Parameters whose +-eps perturbation flipped a ReLU gate or a max-pool
    // choice; the central difference is not a derivative there, so another
    // parameter from the same block is drawn instead.
    std::size_t skipped_nonsmooth = 0;
};

// Central-difference check of model_backward for the single-sample loss
// (pred - target)^2, on a random subsample of each parameter block.
// Relative error is |a - b| / max(|a|, |b|, 1e-8).
GradientCheckResult gradient_check(const ModelParams& p, const FeatureTensor& x, double target, double eps,
                                   const GradientCheckOptions& options = {});

}  // namespace cavsense
