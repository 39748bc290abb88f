#include "cavsense/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cavsense/errors.hpp"
#include "cavsense/rng.hpp"

namespace cavsense {

namespace {

std::size_t valid_length(std::size_t length, std::size_t kernel, std::size_t stride) {
    if (length < kernel) return 0;
    return (length - kernel) / stride + 1;
}

// Fixed-order 8-way accumulation: vectorizes without reassociating at the
// compiler's discretion, so results are reproducible.
double dot(const double* a, const double* b, std::size_t n) noexcept {
    double acc[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
    }
    double s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double strided_dot(const double* a, const double* b, std::size_t n, std::size_t stride) noexcept {
    if (stride == 1) return dot(a, b, n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i * stride];
    return s;
}

double sum(const double* a, std::size_t n) noexcept {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        for (std::size_t j = 0; j < 4; ++j) acc[j] += a[i + j];
    }
    double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (; i < n; ++i) s += a[i];
    return s;
}

// y[i * stride] += alpha * x[i]
void axpy(double* y, double alpha, const double* x, std::size_t n, std::size_t stride = 1) noexcept {
    if (stride == 1) {
        for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) y[i * stride] += alpha * x[i];
    }
}

// dst[t] += sum_k w[k] * src[t * stride + k], taps accumulated in k order.
template <std::size_t K>
void correlate_fixed(double* dst, const double* src, const double* w, std::size_t n) noexcept {
    double wk[K];
    for (std::size_t k = 0; k < K; ++k) wk[k] = w[k];
    for (std::size_t t = 0; t < n; ++t) {
        double acc = dst[t];
        for (std::size_t k = 0; k < K; ++k) acc += wk[k] * src[t + k];
        dst[t] = acc;
    }
}

void correlate_accumulate(double* dst, const double* src, const double* w, std::size_t kernel, std::size_t n,
                          std::size_t stride) noexcept {
    if (stride == 1) {
        switch (kernel) {
            case 3: return correlate_fixed<3>(dst, src, w, n);
            case 5: return correlate_fixed<5>(dst, src, w, n);
            case 7: return correlate_fixed<7>(dst, src, w, n);
            case 9: return correlate_fixed<9>(dst, src, w, n);
            default: break;
        }
    }
    for (std::size_t t = 0; t < n; ++t) {
        double acc = dst[t];
        for (std::size_t k = 0; k < kernel; ++k) acc += w[k] * src[t * stride + k];
        dst[t] = acc;
    }
}

// maxpool(relu(pre)) without materializing the ReLU map.
PoolResult pool_relu(const FeatureMap& pre, std::size_t pool) {
    const std::size_t out_len = pre.length / pool;
    PoolResult r{FeatureMap(pre.channels, out_len), std::vector<std::size_t>(pre.channels * out_len)};
    for (std::size_t c = 0; c < pre.channels; ++c) {
        const double* src = pre.row(c);
        for (std::size_t j = 0; j < out_len; ++j) {
            std::size_t best = j * pool;
            double best_v = relu(src[best]);
            for (std::size_t q = 1; q < pool; ++q) {
                const double v = relu(src[j * pool + q]);
                if (v > best_v) {
                    best_v = v;
                    best = j * pool + q;
                }
            }
            r.output.at(c, j) = best_v;
            r.argmax[c * out_len + j] = c * pre.length + best;
        }
    }
    return r;
}

enum class Stage { conv1, conv2, fc1, fc2 };

void run_from(Stage stage, ForwardCache& c, const ModelParams& p) {
    switch (stage) {
        case Stage::conv1:
            c.conv1_pre = conv1d_forward(c.input, p.conv1);
            c.pool1 = pool_relu(c.conv1_pre, p.arch.pool);
            [[fallthrough]];
        case Stage::conv2:
            c.conv2_pre = conv1d_forward(c.pool1.output, p.conv2);
            c.pool2 = pool_relu(c.conv2_pre, p.arch.pool);
            [[fallthrough]];
        case Stage::fc1: {
            const auto& h = c.pool2.output.data;
            const std::size_t in = p.fc1.in_features;
            c.fc1_pre.resize(p.fc1.out_features);
            c.fc1_act.resize(p.fc1.out_features);
            for (std::size_t j = 0; j < p.fc1.out_features; ++j) {
                c.fc1_pre[j] = p.fc1.bias[j] + dot(p.fc1.weights.data() + j * in, h.data(), in);
                c.fc1_act[j] = relu(c.fc1_pre[j]);
            }
            [[fallthrough]];
        }
        case Stage::fc2:
            c.logit = p.fc2.bias[0] + dot(p.fc2.weights.data(), c.fc1_act.data(), p.fc2.in_features);
            c.prediction = sigmoid(c.logit);
    }
}

void check_layer(const Conv1DLayer& l, std::size_t out, std::size_t in, std::size_t k, std::size_t stride,
                 const char* name) {
    if (l.out_channels != out || l.in_channels != in || l.kernel_size != k || l.stride != stride ||
        l.weights.size() != out * in * k || l.bias.size() != out) {
        throw shape_error(std::string(name) + ": layer shape inconsistent with architecture");
    }
}

void check_layer(const DenseLayer& l, std::size_t out, std::size_t in, const char* name) {
    if (l.out_features != out || l.in_features != in || l.weights.size() != out * in || l.bias.size() != out) {
        throw shape_error(std::string(name) + ": layer shape inconsistent with architecture");
    }
}

void check_params(const ModelParams& p) {
    p.arch.validate();
    const auto& a = p.arch;
    check_layer(p.conv1, a.conv1_channels, a.input_channels, a.conv1_kernel, a.stride, "conv1");
    check_layer(p.conv2, a.conv2_channels, a.conv1_channels, a.conv2_kernel, a.stride, "conv2");
    check_layer(p.fc1, a.fc_hidden, a.flattened_length(), "fc1");
    check_layer(p.fc2, 1, a.fc_hidden, "fc2");
}

}  // namespace

std::size_t Architecture::conv1_length() const { return valid_length(input_length, conv1_kernel, stride); }
std::size_t Architecture::pool1_length() const { return pool == 0 ? 0 : conv1_length() / pool; }
std::size_t Architecture::conv2_length() const { return valid_length(pool1_length(), conv2_kernel, stride); }
std::size_t Architecture::pool2_length() const { return pool == 0 ? 0 : conv2_length() / pool; }
std::size_t Architecture::flattened_length() const { return conv2_channels * pool2_length(); }

void Architecture::validate() const {
    if (input_channels == 0 || input_length == 0) throw shape_error("input: empty input shape");
    if (conv1_kernel == 0 || conv2_kernel == 0) throw shape_error("conv: kernel size must be >= 1");
    if (stride == 0) throw shape_error("conv: stride must be >= 1");
    if (pool == 0) throw shape_error("pool: pool size must be >= 1");
    if (conv1_channels == 0 || conv2_channels == 0 || fc_hidden == 0) throw shape_error("layer widths must be >= 1");
    if (conv1_length() == 0) throw shape_error("conv1: input shorter than kernel");
    if (pool1_length() == 0) throw shape_error("pool1: feature map shorter than pool");
    if (conv2_length() == 0) throw shape_error("conv2: feature map shorter than kernel");
    if (pool2_length() == 0) throw shape_error("pool2: feature map shorter than pool");
}

FeatureMap to_feature_map(const FeatureTensor& x) {
    if (x.values.size() != kFeatureChannels * x.length) throw shape_error("input: tensor size mismatch");
    FeatureMap m;
    m.channels = kFeatureChannels;
    m.length = x.length;
    m.data = x.values;
    return m;
}

Conv1DLayer::Conv1DLayer(std::size_t out, std::size_t in, std::size_t kernel, std::size_t stride_)
    : out_channels(out), in_channels(in), kernel_size(kernel), stride(stride_), weights(out * in * kernel), bias(out) {}

DenseLayer::DenseLayer(std::size_t out, std::size_t in)
    : out_features(out), in_features(in), weights(out * in), bias(out) {}

namespace {

const Architecture& validated(const Architecture& a) {
    a.validate();
    return a;
}

}  // namespace

ModelParams::ModelParams(const Architecture& a)
    : arch(validated(a)),
      conv1(a.conv1_channels, a.input_channels, a.conv1_kernel, a.stride),
      conv2(a.conv2_channels, a.conv1_channels, a.conv2_kernel, a.stride),
      fc1(a.fc_hidden, a.flattened_length()),
      fc2(1, a.fc_hidden) {}

std::array<ParamBlock, kParamBlocks> ModelParams::blocks() {
    return {ParamBlock{"conv1.weight", conv1.weights}, ParamBlock{"conv1.bias", conv1.bias},
            ParamBlock{"conv2.weight", conv2.weights}, ParamBlock{"conv2.bias", conv2.bias},
            ParamBlock{"fc1.weight", fc1.weights},     ParamBlock{"fc1.bias", fc1.bias},
            ParamBlock{"fc2.weight", fc2.weights},     ParamBlock{"fc2.bias", fc2.bias}};
}

std::array<ConstParamBlock, kParamBlocks> ModelParams::blocks() const {
    return {ConstParamBlock{"conv1.weight", conv1.weights}, ConstParamBlock{"conv1.bias", conv1.bias},
            ConstParamBlock{"conv2.weight", conv2.weights}, ConstParamBlock{"conv2.bias", conv2.bias},
            ConstParamBlock{"fc1.weight", fc1.weights},     ConstParamBlock{"fc1.bias", fc1.bias},
            ConstParamBlock{"fc2.weight", fc2.weights},     ConstParamBlock{"fc2.bias", fc2.bias}};
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks()) n += b.values.size();
    return n;
}

void ModelParams::set_zero() {
    for (auto& b : blocks()) std::ranges::fill(b.values, 0.0);
}

bool ModelParams::same_shape(const ModelParams& other) const noexcept {
    const auto a = blocks();
    const auto b = other.blocks();
    for (std::size_t i = 0; i < kParamBlocks; ++i) {
        if (a[i].values.size() != b[i].values.size()) return false;
    }
    return arch == other.arch;
}

FeatureMap conv1d_forward(const FeatureMap& input, const Conv1DLayer& layer) {
    if (input.channels != layer.in_channels) {
        throw shape_error("conv1d: input has " + std::to_string(input.channels) + " channels, layer expects " +
                          std::to_string(layer.in_channels));
    }
    if (layer.kernel_size == 0 || layer.stride == 0) throw shape_error("conv1d: kernel and stride must be >= 1");
    if (input.length < layer.kernel_size) throw shape_error("conv1d: input shorter than kernel");
    const std::size_t out_len = valid_length(input.length, layer.kernel_size, layer.stride);
    FeatureMap out(layer.out_channels, out_len);
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        double* dst = out.row(o);
        std::fill(dst, dst + out_len, layer.bias[o]);
        for (std::size_t c = 0; c < layer.in_channels; ++c) {
            const double* w = &layer.weights[(o * layer.in_channels + c) * layer.kernel_size];
            correlate_accumulate(dst, input.row(c), w, layer.kernel_size, out_len, layer.stride);
        }
    }
    return out;
}

double sigmoid(double x) noexcept {
    double y;
    if (x >= 0.0) {
        y = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        y = e / (1.0 + e);
    }
    // Keep the open interval even where exp saturates.
    return std::clamp(y, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

PoolResult maxpool_forward(const FeatureMap& input, std::size_t pool) {
    if (pool == 0) throw shape_error("maxpool: pool size must be >= 1");
    const std::size_t out_len = input.length / pool;
    PoolResult r{FeatureMap(input.channels, out_len), std::vector<std::size_t>(input.channels * out_len)};
    for (std::size_t c = 0; c < input.channels; ++c) {
        const double* src = input.row(c);
        for (std::size_t j = 0; j < out_len; ++j) {
            std::size_t best = j * pool;
            for (std::size_t q = 1; q < pool; ++q) {
                if (src[j * pool + q] > src[best]) best = j * pool + q;
            }
            r.output.at(c, j) = src[best];
            r.argmax[c * out_len + j] = c * input.length + best;
        }
    }
    return r;
}

namespace {

void check_input(const FeatureTensor& x, const Architecture& a) {
    if (x.length != a.input_length || x.values.size() != a.input_channels * x.length) {
        throw shape_error("input: expected " + std::to_string(a.input_channels) + "x" +
                          std::to_string(a.input_length) + " tensor, got length " + std::to_string(x.length));
    }
}

void check_cache(const ForwardCache& cache, const Architecture& a) {
    if (!(cache.arch == a) || cache.conv1_pre.channels != a.conv1_channels ||
        cache.conv1_pre.length != a.conv1_length() || cache.conv2_pre.length != a.conv2_length() ||
        cache.pool2.output.data.size() != a.flattened_length() || cache.fc1_act.size() != a.fc_hidden) {
        throw state_error("forward cache does not match the model parameters");
    }
}

// Gradient of the flattened conv output -> conv2 and conv1 parameters.
void conv_backward(const ForwardCache& cache, const ModelParams& p, const std::vector<double>& d_flat,
                   ModelParams& grads) {
    const auto& a = p.arch;

    FeatureMap d_conv2(a.conv2_channels, a.conv2_length());
    for (std::size_t i = 0; i < d_flat.size(); ++i) {
        const std::size_t idx = cache.pool2.argmax[i];
        if (cache.conv2_pre.data[idx] > 0.0) d_conv2.data[idx] += d_flat[i];
    }

    const FeatureMap& in2 = cache.pool1.output;
    FeatureMap d_pool1(a.conv1_channels, a.pool1_length());
    const std::size_t l2 = a.conv2_length();
    const std::size_t k2 = a.conv2_kernel;
    // Zero-padded copy of one output-gradient row, so the input gradient is
    // a plain correlation with the flipped kernel.
    std::vector<double> padded(l2 + 2 * (k2 - 1), 0.0);
    std::vector<double> flipped(k2);
    for (std::size_t o = 0; o < a.conv2_channels; ++o) {
        const double* dz = d_conv2.row(o);
        grads.conv2.bias[o] += sum(dz, l2);
        if (a.stride == 1) std::copy(dz, dz + l2, padded.begin() + static_cast<std::ptrdiff_t>(k2 - 1));
        for (std::size_t c = 0; c < a.conv1_channels; ++c) {
            for (std::size_t k = 0; k < k2; ++k) {
                grads.conv2.w(o, c, k) += strided_dot(dz, in2.row(c) + k, l2, a.stride);
            }
            if (a.stride == 1) {
                for (std::size_t k = 0; k < k2; ++k) flipped[k] = p.conv2.w(o, c, k2 - 1 - k);
                correlate_accumulate(d_pool1.row(c), padded.data(), flipped.data(), k2, l2 + k2 - 1, 1);
            } else {
                for (std::size_t k = 0; k < k2; ++k) axpy(d_pool1.row(c) + k, p.conv2.w(o, c, k), dz, l2, a.stride);
            }
        }
    }

    FeatureMap d_conv1(a.conv1_channels, a.conv1_length());
    for (std::size_t i = 0; i < d_pool1.data.size(); ++i) {
        const std::size_t idx = cache.pool1.argmax[i];
        if (cache.conv1_pre.data[idx] > 0.0) d_conv1.data[idx] += d_pool1.data[i];
    }

    // conv1 needs no input gradient.
    const std::size_t l1 = a.conv1_length();
    for (std::size_t o = 0; o < a.conv1_channels; ++o) {
        const double* dz = d_conv1.row(o);
        grads.conv1.bias[o] += sum(dz, l1);
        for (std::size_t c = 0; c < a.input_channels; ++c) {
            for (std::size_t k = 0; k < a.conv1_kernel; ++k) {
                grads.conv1.w(o, c, k) += strided_dot(dz, cache.input.row(c) + k, l1, a.stride);
            }
        }
    }
}

}  // namespace

ForwardResult model_forward(const FeatureTensor& x, const ModelParams& p) {
    const FeatureTensor* one = &x;
    auto batch = batch_forward(std::span<const FeatureTensor* const>(&one, 1), p);
    return std::move(batch.front());
}

std::vector<ForwardResult> batch_forward(std::span<const FeatureTensor* const> xs, const ModelParams& p) {
    check_params(p);
    for (const auto* x : xs) check_input(*x, p.arch);

    std::vector<ForwardResult> out(xs.size());
    for (std::size_t s = 0; s < xs.size(); ++s) {
        auto& c = out[s].cache;
        c.arch = p.arch;
        c.input = to_feature_map(*xs[s]);
        c.conv1_pre = conv1d_forward(c.input, p.conv1);
        c.pool1 = pool_relu(c.conv1_pre, p.arch.pool);
        c.conv2_pre = conv1d_forward(c.pool1.output, p.conv2);
        c.pool2 = pool_relu(c.conv2_pre, p.arch.pool);
        c.fc1_pre.resize(p.fc1.out_features);
        c.fc1_act.resize(p.fc1.out_features);
    }
    // fc1 row by row across the batch so each weight row is read once.
    const std::size_t in = p.fc1.in_features;
    for (std::size_t j = 0; j < p.fc1.out_features; ++j) {
        const double* w = p.fc1.weights.data() + j * in;
        for (auto& r : out) {
            auto& c = r.cache;
            c.fc1_pre[j] = p.fc1.bias[j] + dot(w, c.pool2.output.data.data(), in);
            c.fc1_act[j] = relu(c.fc1_pre[j]);
        }
    }
    for (auto& r : out) {
        run_from(Stage::fc2, r.cache, p);
        r.prediction = r.cache.prediction;
    }
    return out;
}

double predict(const FeatureTensor& x, const ModelParams& p) { return model_forward(x, p).prediction; }

ModelParams model_backward(const ForwardCache& cache, const ModelParams& p, double d_loss_d_pred) {
    ModelParams grads(p.arch);
    accumulate_backward(cache, p, d_loss_d_pred, grads);
    return grads;
}

void accumulate_backward(const ForwardCache& cache, const ModelParams& p, double d_loss_d_pred, ModelParams& grads) {
    const ForwardCache* one = &cache;
    batch_accumulate_backward(std::span<const ForwardCache* const>(&one, 1), p, std::span<const double>(&d_loss_d_pred, 1),
                              grads);
}

void batch_accumulate_backward(std::span<const ForwardCache* const> caches, const ModelParams& p,
                               std::span<const double> d_loss_d_pred, ModelParams& grads) {
    if (caches.size() != d_loss_d_pred.size()) {
        throw state_error("backward: " + std::to_string(caches.size()) + " caches but " +
                          std::to_string(d_loss_d_pred.size()) + " loss gradients");
    }
    const auto& a = p.arch;
    for (const auto* c : caches) check_cache(*c, a);
    if (!grads.same_shape(p)) throw state_error("gradient buffer does not match the model parameters");

    const std::size_t n = caches.size();
    const std::size_t flat = a.flattened_length();
    std::vector<double> d_logit(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double y = caches[s]->prediction;
        d_logit[s] = d_loss_d_pred[s] * y * (1.0 - y);
    }

    // fc2
    for (std::size_t s = 0; s < n; ++s) {
        if (d_logit[s] == 0.0) continue;
        grads.fc2.bias[0] += d_logit[s];
        axpy(grads.fc2.weights.data(), d_logit[s], caches[s]->fc1_act.data(), a.fc_hidden);
    }

    // fc1, row-major over the batch. Every gradient element still receives
    // its per-sample contributions in sample order.
    std::vector<std::vector<double>> d_flat(n, std::vector<double>(flat, 0.0));
    for (std::size_t j = 0; j < a.fc_hidden; ++j) {
        const double* w = p.fc1.weights.data() + j * flat;
        double* gw = grads.fc1.weights.data() + j * flat;
        for (std::size_t s = 0; s < n; ++s) {
            if (d_logit[s] == 0.0 || !(caches[s]->fc1_pre[j] > 0.0)) continue;
            const double dz = p.fc2.weights[j] * d_logit[s];
            grads.fc1.bias[j] += dz;
            const double* h = caches[s]->pool2.output.data.data();
            double* df = d_flat[s].data();
            for (std::size_t k = 0; k < flat; ++k) {
                gw[k] += dz * h[k];
                df[k] += dz * w[k];
            }
        }
    }

    for (std::size_t s = 0; s < n; ++s) {
        if (d_logit[s] == 0.0) continue;
        conv_backward(*caches[s], p, d_flat[s], grads);
    }
}

LossResult mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.empty() || pred.size() != target.size()) {
        throw validation_error("mse_loss needs equal, non-zero lengths (got " + std::to_string(pred.size()) + " and " +
                               std::to_string(target.size()) + ")");
    }
    const double n = static_cast<double>(pred.size());
    LossResult r;
    r.gradient.resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        r.loss += d * d;
        r.gradient[i] = 2.0 * d / n;
    }
    r.loss /= n;
    return r;
}

AdamState::AdamState(const ModelParams& shape, AdamHyper h) : hyper(h), m(shape.arch), v(shape.arch) {}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state) {
    if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v)) {
        throw shape_error("adam_step: parameter, gradient and moment shapes differ");
    }
    for (const auto& b : grads.blocks()) {
        for (double g : b.values) {
            if (!std::isfinite(g)) throw numeric_error("non-finite gradient in block " + std::string(b.name));
        }
    }

    state.t += 1;
    const auto& hp = state.hyper;
    const double t = static_cast<double>(state.t);
    const double bc1 = 1.0 - std::pow(hp.beta1, t);
    const double bc2 = 1.0 - std::pow(hp.beta2, t);

    auto pb = params.blocks();
    const auto gb = grads.blocks();
    auto mb = state.m.blocks();
    auto vb = state.v.blocks();
    for (std::size_t b = 0; b < kParamBlocks; ++b) {
        double* theta = pb[b].values.data();
        const double* g = gb[b].values.data();
        double* m = mb[b].values.data();
        double* v = vb[b].values.data();
        const std::size_t n = pb[b].values.size();
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
        }
    }
}

ModelParams init_params(std::uint64_t seed, const Architecture& arch) {
    ModelParams p(arch);
    SplitMix64 rng(seed);
    auto fill = [&rng](std::vector<double>& w, double bound) {
        for (double& x : w) x = rng.uniform(-bound, bound);
    };
    fill(p.conv1.weights, std::sqrt(6.0 / static_cast<double>(arch.input_channels * arch.conv1_kernel)));
    fill(p.conv2.weights, std::sqrt(6.0 / static_cast<double>(arch.conv1_channels * arch.conv2_kernel)));
    fill(p.fc1.weights, std::sqrt(6.0 / static_cast<double>(arch.flattened_length())));
    fill(p.fc2.weights, std::sqrt(6.0 / static_cast<double>(arch.fc_hidden + 1)));
    return p;
}

namespace {

bool same_gates(const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] > 0.0) != (b[i] > 0.0)) return false;
    }
    return true;
}

// True when `probe` took the same ReLU and max-pool branches as `base` for
// every stage at or after `from`.
bool same_branches(const ForwardCache& base, const ForwardCache& probe, Stage from) {
    if (from == Stage::conv1) {
        if (!same_gates(base.conv1_pre.data, probe.conv1_pre.data) || base.pool1.argmax != probe.pool1.argmax) {
            return false;
        }
    }
    if (from == Stage::conv1 || from == Stage::conv2) {
        if (!same_gates(base.conv2_pre.data, probe.conv2_pre.data) || base.pool2.argmax != probe.pool2.argmax) {
            return false;
        }
    }
    if (from != Stage::fc2) {
        if (!same_gates(base.fc1_pre, probe.fc1_pre)) return false;
    }
    return true;
}

Stage stage_of_block(std::size_t block) {
    switch (block / 2) {
        case 0: return Stage::conv1;
        case 1: return Stage::conv2;
        case 2: return Stage::fc1;
        default: return Stage::fc2;
    }
}

}  // namespace

GradientCheckResult gradient_check(const ModelParams& p, const FeatureTensor& x, double target, double eps,
                                   const GradientCheckOptions& options) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw validation_error("gradient_check eps must lie in [1e-7, 1e-3]");

    const ForwardResult base = model_forward(x, p);
    ModelParams analytic = model_backward(base.cache, p, 2.0 * (base.prediction - target));
    if (options.conv2_gradient_scale != 1.0) {
        for (double& g : analytic.conv2.weights) g *= options.conv2_gradient_scale;
        for (double& g : analytic.conv2.bias) g *= options.conv2_gradient_scale;
    }

    GradientCheckResult result;
    ModelParams work = p;
    auto work_blocks = work.blocks();
    const auto grad_blocks = analytic.blocks();
    SplitMix64 rng(options.subsample_seed);

    for (std::size_t b = 0; b < kParamBlocks; ++b) {
        const std::size_t n = work_blocks[b].values.size();
        const std::size_t want = std::min(n, options.samples_per_block);
        const std::size_t max_attempts = std::min(n, 3 * want);
        const Stage stage = stage_of_block(b);

        // Partial Fisher-Yates gives distinct random indices.
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;

        std::size_t accepted = 0;
        for (std::size_t attempt = 0; attempt < max_attempts && accepted < want; ++attempt) {
            const std::size_t swap_with = attempt + rng.below(n - attempt);
            std::swap(order[attempt], order[swap_with]);
            const std::size_t idx = order[attempt];

            double& theta = work_blocks[b].values[idx];
            const double saved = theta;

            ForwardCache plus = base.cache;
            theta = saved + eps;
            run_from(stage, plus, work);

            ForwardCache minus = base.cache;
            theta = saved - eps;
            run_from(stage, minus, work);
            theta = saved;

            if (!same_branches(base.cache, plus, stage) || !same_branches(base.cache, minus, stage)) {
                ++result.skipped_nonsmooth;
                continue;
            }
            // loss(+) - loss(-) in factored form; the expanded difference of two
            // nearly equal squares loses most of its digits.
            const double dp = plus.prediction - minus.prediction;
            const double fd = dp * (plus.prediction + minus.prediction - 2.0 * target) / (2.0 * eps);
            const double an = grad_blocks[b].values[idx];
            const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
            result.block_max[b] = std::max(result.block_max[b], rel);
            result.max_relative_error = std::max(result.max_relative_error, rel);
            ++accepted;
            ++result.checked;
        }
    }
    return result;
}

}  // namespace cavsense
