#include "ddsr/srcnn.hpp"

// Always use the packed GEMM path: the coefficient-based small-product path
// peels by pointer alignment, which makes sums depend on heap addresses.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <fmt/format.h>

#include "ddsr/errors.hpp"
#include "ddsr/parallel.hpp"

namespace ddsr {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

// Upper bound on doubles held by one im2col block during inference.
constexpr std::size_t kMaxColumnBlock = std::size_t{1} << 22;

// Unfolds rows [y0, y1) of the valid-mode output into a (C*kh*kw) x ((y1-y0)*Wo)
// column matrix.
void im2col(const Tensor3& in, int kh, int kw, int y0, int y1, std::vector<double>& col) {
    const int wo = in.width - kw + 1;
    const std::size_t p = static_cast<std::size_t>(y1 - y0) * wo;
    col.resize(static_cast<std::size_t>(in.channels) * kh * kw * p);
    double* dst = col.data();
    for (int c = 0; c < in.channels; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx)
                for (int oy = y0; oy < y1; ++oy) {
                    const double* src = &in.data[(static_cast<std::size_t>(c) * in.height + oy + ky) * in.width + kx];
                    dst = std::copy(src, src + wo, dst);
                }
}

// Adjoint of im2col over the full output: scatters columns back onto `grad`.
void col2im_add(const double* col, int kh, int kw, Tensor3& grad) {
    const int ho = grad.height - kh + 1;
    const int wo = grad.width - kw + 1;
    for (int c = 0; c < grad.channels; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx)
                for (int oy = 0; oy < ho; ++oy) {
                    double* dst = &grad.data[(static_cast<std::size_t>(c) * grad.height + oy + ky) * grad.width + kx];
                    for (int ox = 0; ox < wo; ++ox) dst[ox] += *col++;
                }
}

void apply_activation(Tensor3& t, Activation act) {
    if (act == Activation::relu) {
        for (double& v : t.data) v = v > 0.0 ? v : 0.0;
    }
}

Tensor3 replicate_pad(const Tensor3& in, int py, int px) {
    if (py == 0 && px == 0) return in;
    Tensor3 out(in.channels, in.height + 2 * py, in.width + 2 * px);
    for (int c = 0; c < in.channels; ++c)
        for (int y = 0; y < out.height; ++y) {
            const int sy = std::clamp(y - py, 0, in.height - 1);
            for (int x = 0; x < out.width; ++x) {
                out.at(c, y, x) = in.at(c, sy, std::clamp(x - px, 0, in.width - 1));
            }
        }
    return out;
}

Tensor3 conv_valid(const Tensor3& in, const ConvLayer& layer) {
    const int ho = in.height - layer.kernel_h + 1;
    const int wo = in.width - layer.kernel_w + 1;
    Tensor3 out(layer.out_channels, ho, wo);
    const ConstMatMap w(layer.weights.data(), layer.out_channels, static_cast<Eigen::Index>(layer.fan_in()));
    MatMap o(out.data.data(), layer.out_channels, static_cast<Eigen::Index>(out.plane()));

    if (layer.kernel_h == 1 && layer.kernel_w == 1) {
        o.noalias() = w * ConstMatMap(in.data.data(), in.channels, static_cast<Eigen::Index>(in.plane()));
    } else {
        const std::size_t per_row = layer.fan_in() * static_cast<std::size_t>(wo);
        const int rows = std::max(1, static_cast<int>(kMaxColumnBlock / std::max<std::size_t>(per_row, 1)));
        std::vector<double> col;
        for (int y0 = 0; y0 < ho; y0 += rows) {
            const int y1 = std::min(ho, y0 + rows);
            im2col(in, layer.kernel_h, layer.kernel_w, y0, y1, col);
            const Eigen::Index p = static_cast<Eigen::Index>(y1 - y0) * wo;
            o.middleCols(static_cast<Eigen::Index>(y0) * wo, p).noalias() =
                w * ConstMatMap(col.data(), static_cast<Eigen::Index>(layer.fan_in()), p);
        }
    }
    for (int c = 0; c < layer.out_channels; ++c) {
        const double b = layer.bias[static_cast<std::size_t>(c)];
        double* plane = out.data.data() + static_cast<std::size_t>(c) * out.plane();
        for (std::size_t i = 0; i < out.plane(); ++i) plane[i] += b;
    }
    apply_activation(out, layer.activation);
    return out;
}

std::vector<const ConvLayer*> flatten_layers(std::span<const UnitWeights> chain) {
    std::vector<const ConvLayer*> layers;
    for (const auto& u : chain)
        for (const auto& l : u.layers) layers.push_back(&l);
    return layers;
}

int chain_margin(std::span<const UnitWeights> chain) {
    int m = 0;
    for (const auto& u : chain) m += u.architecture().margin();
    return m;
}

std::size_t chain_parameter_count(std::span<const UnitWeights> chain) {
    std::size_t n = 0;
    for (const auto& u : chain) n += u.parameter_count();
    return n;
}

// Parameter order: per unit, per layer, weights then biases.
std::vector<double> flatten(std::span<const UnitWeights> chain) {
    std::vector<double> flat;
    for (const auto& u : chain)
        for (const auto& l : u.layers) {
            flat.insert(flat.end(), l.weights.begin(), l.weights.end());
            flat.insert(flat.end(), l.bias.begin(), l.bias.end());
        }
    return flat;
}

void unflatten_into(std::span<const double> flat, std::span<UnitWeights> chain) {
    auto it = flat.begin();
    for (auto& u : chain)
        for (auto& l : u.layers) {
            std::copy_n(it, l.weights.size(), l.weights.begin());
            it += static_cast<std::ptrdiff_t>(l.weights.size());
            std::copy_n(it, l.bias.size(), l.bias.begin());
            it += static_cast<std::ptrdiff_t>(l.bias.size());
        }
}

Tensor3 patch_tensor(const TrainingPair& pair) {
    return Tensor3(1, pair.input_size, pair.input_size, pair.input);
}

void check_pair(const TrainingPair& pair, int margin) {
    if (pair.input_size - 2 * margin != pair.target_size || pair.target_size < 1 ||
        pair.input.size() != static_cast<std::size_t>(pair.input_size) * pair.input_size ||
        pair.target.size() != static_cast<std::size_t>(pair.target_size) * pair.target_size) {
        throw DimensionError(fmt::format("training pair {}->{} does not match a chain margin of {}",
                                         pair.input_size, pair.target_size, margin));
    }
}

// Sum of squared errors for one patch and, when `grad` is non-null, the
// gradient of (sse * loss_scale) accumulated into the flat buffer.
double patch_backprop(const TrainingPair& pair, const std::vector<const ConvLayer*>& layers, double loss_scale,
                      double* grad) {
    const std::size_t nl = layers.size();
    std::vector<Tensor3> acts;
    acts.reserve(nl + 1);
    acts.push_back(patch_tensor(pair));
    for (const ConvLayer* l : layers) acts.push_back(conv_valid(acts.back(), *l));

    const Tensor3& y = acts.back();
    Tensor3 delta(y.channels, y.height, y.width);
    double sse = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const double d = y.data[i] - pair.target[i];
        sse += d * d;
        delta.data[i] = 2.0 * d * loss_scale;
    }
    if (grad == nullptr) return sse;

    // Offsets of each layer's parameter block in the flat gradient.
    std::vector<std::size_t> offsets(nl);
    std::size_t off = 0;
    for (std::size_t l = 0; l < nl; ++l) {
        offsets[l] = off;
        off += layers[l]->weights.size() + layers[l]->bias.size();
    }

    std::vector<double> col;
    for (std::size_t li = nl; li-- > 0;) {
        const ConvLayer& layer = *layers[li];
        const Tensor3& in = acts[li];
        if (layer.activation == Activation::relu) {
            const Tensor3& out = acts[li + 1];
            for (std::size_t i = 0; i < delta.data.size(); ++i)
                if (out.data[i] <= 0.0) delta.data[i] = 0.0;
        }
        const auto k = static_cast<Eigen::Index>(layer.fan_in());
        const auto p = static_cast<Eigen::Index>(delta.plane());
        const ConstMatMap d(delta.data.data(), layer.out_channels, p);

        const double* col_ptr = in.data.data();
        if (layer.kernel_h != 1 || layer.kernel_w != 1) {
            im2col(in, layer.kernel_h, layer.kernel_w, 0, delta.height, col);
            col_ptr = col.data();
        }
        const ConstMatMap c(col_ptr, k, p);
        MatMap gw(grad + offsets[li], layer.out_channels, k);
        gw.noalias() += d * c.transpose();
        double* gb = grad + offsets[li] + layer.weights.size();
        for (int o = 0; o < layer.out_channels; ++o) {
            const double* row = delta.data.data() + static_cast<std::size_t>(o) * delta.plane();
            double acc = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) acc += row[j];
            gb[o] += acc;
        }

        if (li == 0) break;
        const ConstMatMap w(layer.weights.data(), layer.out_channels, k);
        RowMat dcol = w.transpose() * d;
        Tensor3 din(in.channels, in.height, in.width);
        col2im_add(dcol.data(), layer.kernel_h, layer.kernel_w, din);
        delta = std::move(din);
    }
    return sse;
}

double learning_rate_for_layer(const TrainConfig& cfg, std::size_t layer_in_unit) {
    return layer_in_unit == 2 ? cfg.learning_rate * cfg.last_layer_lr_scale : cfg.learning_rate;
}

}  // namespace

// ---------------------------------------------------------------------------
// Shapes

Tensor3::Tensor3(int c, int h, int w, double fill)
    : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

Tensor3::Tensor3(int c, int h, int w, std::vector<double> values)
    : channels(c), height(h), width(w), data(std::move(values)) {
    if (data.size() != static_cast<std::size_t>(c) * h * w) throw DimensionError("tensor size mismatch");
}

ConvLayer::ConvLayer(int kh, int kw, int in, int out, Activation act)
    : kernel_h(kh), kernel_w(kw), in_channels(in), out_channels(out),
      weights(static_cast<std::size_t>(kh) * kw * in * out, 0.0), bias(static_cast<std::size_t>(out), 0.0),
      activation(act) {}

void ConvLayer::validate() const {
    if (kernel_h < 1 || kernel_w < 1 || in_channels < 1 || out_channels < 1) {
        throw DimensionError("convolution layer dimensions must be positive");
    }
    if (weights.size() != static_cast<std::size_t>(out_channels) * fan_in()) {
        throw DimensionError("weight buffer does not match out*in*kh*kw");
    }
    if (bias.size() != static_cast<std::size_t>(out_channels)) {
        throw DimensionError("bias buffer does not match out_channels");
    }
    for (double v : weights)
        if (!std::isfinite(v)) throw DimensionError("non-finite weight");
    for (double v : bias)
        if (!std::isfinite(v)) throw DimensionError("non-finite bias");
}

UnitWeights UnitWeights::zeros(const UnitArchitecture& arch) {
    UnitWeights u;
    u.layers[0] = ConvLayer(arch.kernels[0], arch.kernels[0], 1, arch.features1, Activation::relu);
    u.layers[1] = ConvLayer(arch.kernels[1], arch.kernels[1], arch.features1, arch.features2, Activation::relu);
    u.layers[2] = ConvLayer(arch.kernels[2], arch.kernels[2], arch.features2, 1, Activation::linear);
    u.validate();
    return u;
}

UnitWeights UnitWeights::random(const UnitArchitecture& arch, std::uint64_t seed, double stddev) {
    UnitWeights u = zeros(arch);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& l : u.layers)
        for (double& w : l.weights) w = dist(rng);
    return u;
}

UnitWeights UnitWeights::pass_through(const UnitArchitecture& arch) {
    if (arch.features1 < 2 || arch.features2 < 2) {
        throw DimensionError("a pass-through unit needs at least two features per hidden layer");
    }
    UnitWeights u = zeros(arch);
    const int c0 = arch.kernels[0] / 2, c1 = arch.kernels[1] / 2, c2 = arch.kernels[2] / 2;
    u.layers[0].weight(0, 0, c0, c0) = 1.0;
    u.layers[0].weight(1, 0, c0, c0) = -1.0;
    u.layers[1].weight(0, 0, c1, c1) = 1.0;
    u.layers[1].weight(1, 1, c1, c1) = 1.0;
    u.layers[2].weight(0, 0, c2, c2) = 1.0;
    u.layers[2].weight(0, 1, c2, c2) = -1.0;
    return u;
}

UnitArchitecture UnitWeights::architecture() const {
    return {{layers[0].kernel_h, layers[1].kernel_h, layers[2].kernel_h},
            layers[0].out_channels,
            layers[1].out_channels};
}

void UnitWeights::validate() const {
    for (const auto& l : layers) {
        l.validate();
        if (l.kernel_h != l.kernel_w || l.kernel_h % 2 == 0) {
            throw DimensionError("unit kernels must be square with odd size");
        }
    }
    if (layers[0].in_channels != 1 || layers[2].out_channels != 1) {
        throw DimensionError("a mapping unit must take and produce a single channel");
    }
    if (layers[1].in_channels != layers[0].out_channels || layers[2].in_channels != layers[1].out_channels) {
        throw DimensionError("inconsistent channel chain between unit layers");
    }
    if (layers[0].activation != Activation::relu || layers[1].activation != Activation::relu ||
        layers[2].activation != Activation::linear) {
        throw DimensionError("unit activations must be relu, relu, linear");
    }
}

std::size_t UnitWeights::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

void NetworkWeights::validate() const {
    if (units.empty()) throw DimensionError("network has no units");
    if (!(depth_norm > 0.0) || !std::isfinite(depth_norm)) throw DimensionError("depth_norm must be positive");
    for (const auto& u : units) u.validate();
}

void TrainConfig::validate() const {
    const int margin = architecture.margin();
    if (sub_image <= 2 * margin) {
        throw ConfigError(fmt::format("sub_image {} leaves no output after a margin of {}", sub_image, margin));
    }
    if (stride < 1) throw ConfigError("stride must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be finite and non-negative");
    }
    if (!(last_layer_lr_scale >= 0.0)) throw ConfigError("last_layer_lr_scale must be non-negative");
    if (epochs < 1) throw ConfigError("epochs must be positive");
    if (batch < 1) throw ConfigError("batch must be positive");
    if (fine_tune_epochs < 0) throw ConfigError("fine_tune_epochs must be non-negative");
    if (!(init_stddev >= 0.0)) throw ConfigError("init_stddev must be non-negative");
}

// ---------------------------------------------------------------------------
// Data

std::vector<TrainingPair> extract_subimages(const DepthMap& hr, const DepthMap& lr_input, const TrainConfig& cfg,
                                            int margin) {
    if (hr.width() != lr_input.width() || hr.height() != lr_input.height()) {
        throw DimensionError("training input and target must have equal dimensions");
    }
    const int s = cfg.sub_image;
    if (hr.width() < s || hr.height() < s) {
        throw DimensionError(fmt::format("map {}x{} is smaller than sub-image {}", hr.width(), hr.height(), s));
    }
    if (cfg.stride < 1) throw ConfigError("stride must be >= 1");
    const int t = s - 2 * margin;
    if (t < 1) throw DimensionError("sub-image is too small for the network margin");

    const int nx = (hr.width() - s) / cfg.stride + 1;
    const int ny = (hr.height() - s) / cfg.stride + 1;
    std::vector<TrainingPair> pairs;
    pairs.reserve(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int x0 = i * cfg.stride;
            const int y0 = j * cfg.stride;
            TrainingPair p;
            p.input_size = s;
            p.target_size = t;
            p.input.resize(static_cast<std::size_t>(s) * s);
            p.target.resize(static_cast<std::size_t>(t) * t);
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) p.input[static_cast<std::size_t>(y) * s + x] = lr_input.at(x0 + x, y0 + y);
            for (int y = 0; y < t; ++y)
                for (int x = 0; x < t; ++x)
                    p.target[static_cast<std::size_t>(y) * t + x] = hr.at(x0 + margin + x, y0 + margin + y);
            pairs.push_back(std::move(p));
        }
    }
    return pairs;
}

std::vector<TrainingPair> extract_subimages(const DepthMap& hr, const DepthMap& lr_input, const TrainConfig& cfg) {
    return extract_subimages(hr, lr_input, cfg, cfg.architecture.margin());
}

// ---------------------------------------------------------------------------
// Forward

Tensor3 conv_forward(const Tensor3& input, const ConvLayer& layer, Padding padding) {
    layer.validate();
    if (input.channels != layer.in_channels) {
        throw DimensionError(fmt::format("input has {} channels, layer expects {}", input.channels, layer.in_channels));
    }
    if (input.height < 1 || input.width < 1) throw DimensionError("empty convolution input");
    if (padding == Padding::replicate_same) {
        if (layer.kernel_h % 2 == 0 || layer.kernel_w % 2 == 0) {
            throw DimensionError("same padding requires odd kernels");
        }
        return conv_valid(replicate_pad(input, layer.kernel_h / 2, layer.kernel_w / 2), layer);
    }
    if (input.height < layer.kernel_h || input.width < layer.kernel_w) {
        throw DimensionError("input smaller than kernel in valid mode");
    }
    return conv_valid(input, layer);
}

DepthMap unit_forward(const DepthMap& input, const UnitWeights& unit) {
    unit.validate();
    const int min_dim = 2 * unit.architecture().margin() + 1;
    if (input.width() < min_dim || input.height() < min_dim) {
        throw DimensionError(fmt::format("unit input must be at least {}x{}", min_dim, min_dim));
    }
    Tensor3 t(1, input.height(), input.width(), std::vector<double>(input.values().begin(), input.values().end()));
    for (const auto& l : unit.layers) t = conv_forward(t, l, Padding::replicate_same);
    return input.with_values(std::move(t.data));
}

Tensor3 chain_forward_valid(const Tensor3& input, std::span<const UnitWeights> chain) {
    Tensor3 t = input;
    for (const auto& u : chain)
        for (const auto& l : u.layers) t = conv_forward(t, l, Padding::valid);
    return t;
}

// ---------------------------------------------------------------------------
// Loss and gradients

LossAndGradients loss_and_gradients(std::span<const TrainingPair> batch, std::span<const UnitWeights> chain,
                                    int threads) {
    if (batch.empty()) throw DimensionError("empty training batch");
    if (chain.empty()) throw DimensionError("empty unit chain");
    for (const auto& u : chain) u.validate();
    const int margin = chain_margin(chain);
    for (const auto& p : batch) check_pair(p, margin);

    const auto layers = flatten_layers(chain);
    const std::size_t np = chain_parameter_count(chain);
    std::size_t pixels = 0;
    for (const auto& p : batch) pixels += p.target.size();
    const double loss_scale = 1.0 / static_cast<double>(pixels);

    std::vector<std::vector<double>> per_patch(batch.size());
    std::vector<double> sse(batch.size());
    parallel_for(batch.size(), threads, [&](std::size_t i) {
        per_patch[i].assign(np, 0.0);
        sse[i] = patch_backprop(batch[i], layers, loss_scale, per_patch[i].data());
    });

    std::vector<double> total(np, 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        loss += sse[i];
        for (std::size_t k = 0; k < np; ++k) total[k] += per_patch[i][k];
    }

    LossAndGradients out;
    out.loss = loss * loss_scale;
    out.gradients.assign(chain.begin(), chain.end());
    unflatten_into(total, out.gradients);
    return out;
}

LossAndGradients loss_and_gradients(std::span<const TrainingPair> batch, const UnitWeights& unit, int threads) {
    return loss_and_gradients(batch, std::span<const UnitWeights>(&unit, 1), threads);
}

double dataset_loss(std::span<const TrainingPair> data, std::span<const UnitWeights> chain, int threads) {
    if (data.empty()) throw DimensionError("empty dataset");
    const int margin = chain_margin(chain);
    for (const auto& p : data) check_pair(p, margin);
    const auto layers = flatten_layers(chain);
    std::vector<double> sse(data.size());
    parallel_for(data.size(), threads,
                 [&](std::size_t i) { sse[i] = patch_backprop(data[i], layers, 1.0, nullptr); });
    std::size_t pixels = 0;
    for (const auto& p : data) pixels += p.target.size();
    return std::accumulate(sse.begin(), sse.end(), 0.0) / static_cast<double>(pixels);
}

// ---------------------------------------------------------------------------
// Training

void train_chain(std::span<const TrainingPair> dataset, std::span<UnitWeights> chain, const TrainConfig& cfg,
                 TrainReport* report) {
    cfg.validate();
    if (dataset.empty()) throw ConfigError("training dataset is empty");
    if (chain.empty()) throw ConfigError("no units to train");
    const std::span<const UnitWeights> const_chain(chain.data(), chain.size());

    // Per-parameter learning rate, laid out like the flat gradient.
    std::vector<double> rate;
    for (const auto& u : chain)
        for (std::size_t l = 0; l < u.layers.size(); ++l)
            rate.insert(rate.end(), u.layers[l].weights.size() + u.layers[l].bias.size(),
                        learning_rate_for_layer(cfg, l));
    const std::size_t np = rate.size();

    std::vector<double> params = flatten(const_chain);
    std::vector<double> m(np, 0.0), v(np, 0.0);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::uint64_t step = 0;

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.seed);

    TrainReport local;
    local.initial_loss = dataset_loss(dataset, const_chain, cfg.threads);
    std::vector<TrainingPair> batch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_sse = 0.0;
        std::size_t epoch_n = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);

            const auto lg = loss_and_gradients(batch, const_chain, cfg.threads);
            epoch_sse += lg.loss * static_cast<double>(end - start);
            epoch_n += end - start;

            const std::vector<double> flat_grad = flatten(lg.gradients);
            ++step;
            if (cfg.optimizer == Optimizer::sgd) {
                for (std::size_t k = 0; k < np; ++k) params[k] -= rate[k] * flat_grad[k];
            } else {
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
                for (std::size_t k = 0; k < np; ++k) {
                    const double g = flat_grad[k];
                    m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                    v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                    params[k] -= rate[k] * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
                }
            }
            unflatten_into(params, chain);
        }
        local.epoch_loss.push_back(epoch_sse / static_cast<double>(epoch_n));
    }
    local.final_loss = dataset_loss(dataset, const_chain, cfg.threads);
    for (const auto& u : chain) u.validate();
    if (report != nullptr) *report = std::move(local);
}

UnitWeights train_unit(std::span<const TrainingPair> dataset, const TrainConfig& cfg, std::uint64_t init_seed,
                       TrainReport* report) {
    cfg.validate();
    if (dataset.empty()) throw ConfigError("training dataset is empty");
    return train_unit_from(dataset, cfg, UnitWeights::random(cfg.architecture, init_seed, cfg.init_stddev), report);
}

UnitWeights train_unit_from(std::span<const TrainingPair> dataset, const TrainConfig& cfg, UnitWeights init,
                            TrainReport* report) {
    cfg.validate();
    if (dataset.empty()) throw ConfigError("training dataset is empty");
    init.validate();
    train_chain(dataset, std::span<UnitWeights>(&init, 1), cfg, report);
    return init;
}

NetworkWeights train_progressive(std::span<const DepthMap> corpus, ScaleFactor factor, int n_units,
                                 const TrainConfig& cfg, DegradeMethod method, ProgressiveReport* report) {
    cfg.validate();
    if (corpus.empty()) throw ConfigError("training corpus is empty");
    if (n_units < 1) throw ConfigError("need at least one unit");

    NetworkWeights net;
    double hi = 0.0;
    for (const auto& m : corpus) hi = std::max(hi, m.max_value());
    net.depth_norm = hi > 0.0 ? hi : 1.0;
    const double inv = 1.0 / net.depth_norm;

    auto normalized = [&](const DepthMap& m) {
        std::vector<double> v(m.values().begin(), m.values().end());
        for (double& x : v) x *= inv;
        return DepthMap(m.width(), m.height(), std::move(v));
    };

    std::vector<DepthMap> targets;
    std::vector<DepthMap> stage;
    for (const auto& hr : corpus) {
        const auto d = degrade(hr, factor, method);
        std::vector<double> crop;
        crop.reserve(static_cast<std::size_t>(d.cropped_width) * d.cropped_height);
        for (int y = 0; y < d.cropped_height; ++y)
            for (int x = 0; x < d.cropped_width; ++x) crop.push_back(hr.at(x, y));
        targets.push_back(normalized(DepthMap(d.cropped_width, d.cropped_height, std::move(crop))));
        stage.push_back(normalized(resize_bicubic(d.lr, d.cropped_width, d.cropped_height)));
    }
    const std::vector<DepthMap> bicubic_inputs = stage;

    ProgressiveReport local;
    for (int k = 0; k < n_units; ++k) {
        std::vector<TrainingPair> pairs;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            auto p = extract_subimages(targets[i], stage[i], cfg);
            std::move(p.begin(), p.end(), std::back_inserter(pairs));
        }
        local.pairs_per_unit = pairs.size();
        TrainReport tr;
        const std::uint64_t seed = cfg.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(k + 1);
        if (k == 0 || cfg.later_unit_init == LaterUnitInit::gaussian) {
            net.units.push_back(train_unit(pairs, cfg, seed, &tr));
        } else {
            UnitWeights init = UnitWeights::pass_through(cfg.architecture);
            const UnitWeights noise = UnitWeights::random(cfg.architecture, seed, cfg.init_stddev);
            for (std::size_t l = 0; l < init.layers.size(); ++l)
                for (std::size_t i = 0; i < init.layers[l].weights.size(); ++i)
                    init.layers[l].weights[i] += noise.layers[l].weights[i];
            net.units.push_back(train_unit_from(pairs, cfg, std::move(init), &tr));
        }
        local.units.push_back(std::move(tr));
        if (k + 1 < n_units || cfg.fine_tune_epochs > 0) {
            for (auto& s : stage) s = unit_forward(s, net.units.back());
        }
    }

    if (cfg.fine_tune_epochs > 0) {
        const int margin = chain_margin(net.units);
        std::vector<TrainingPair> pairs;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            auto p = extract_subimages(targets[i], bicubic_inputs[i], cfg, margin);
            std::move(p.begin(), p.end(), std::back_inserter(pairs));
        }
        TrainConfig ft = cfg;
        ft.epochs = cfg.fine_tune_epochs;
        ft.sub_image = std::max(cfg.sub_image, 2 * margin + 1);
        train_chain(pairs, net.units, ft, &local.fine_tune);
    }
    if (report != nullptr) *report = std::move(local);
    return net;
}

DepthMap apply_units(const DepthMap& upscaled, const NetworkWeights& net, std::size_t n_units,
                     std::vector<DepthMap>* stages) {
    net.validate();
    n_units = std::min(n_units, net.units.size());
    const double inv = 1.0 / net.depth_norm;
    std::vector<double> v(upscaled.values().begin(), upscaled.values().end());
    for (double& x : v) x *= inv;
    DepthMap cur(upscaled.width(), upscaled.height(), std::move(v));
    auto denormalize = [&](const DepthMap& m) {
        std::vector<double> out(m.values().begin(), m.values().end());
        for (double& x : out) x *= net.depth_norm;
        return upscaled.with_values(std::move(out));
    };
    for (std::size_t k = 0; k < n_units; ++k) {
        cur = unit_forward(cur, net.units[k]);
        if (stages != nullptr) stages->push_back(denormalize(cur));
    }
    return n_units == 0 ? upscaled : denormalize(cur);
}

DepthMap progressive_forward(const DepthMap& lr, ScaleFactor factor, const NetworkWeights& net,
                             std::vector<DepthMap>* stages) {
    net.validate();
    const int s = factor.value();
    DepthMap up = resize_bicubic(lr, lr.width() * s, lr.height() * s);
    if (stages != nullptr) stages->push_back(up);
    return apply_units(up, net, net.units.size(), stages);
}

}  // namespace ddsr
