#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ddsr/image.hpp"
#include "ddsr/resample.hpp"

namespace ddsr {

enum class Activation : std::uint32_t { linear = 0, relu = 1 };

enum class Padding { valid, replicate_same };

/// Dense [channels][height][width] activation volume.
struct Tensor3 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(int c, int h, int w, double fill = 0.0);
    Tensor3(int c, int h, int w, std::vector<double> values);

    double& at(int c, int y, int x) noexcept {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const noexcept {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
};

struct ConvLayer {
    int kernel_h = 1;
    int kernel_w = 1;
    int in_channels = 1;
    int out_channels = 1;
    /// Row-major [out][in][kh][kw].
    std::vector<double> weights;
    std::vector<double> bias;
    Activation activation = Activation::linear;

    ConvLayer() = default;
    ConvLayer(int kh, int kw, int in, int out, Activation act);

    std::size_t fan_in() const noexcept {
        return static_cast<std::size_t>(in_channels) * kernel_h * kernel_w;
    }
    double& weight(int o, int i, int ky, int kx) noexcept {
        return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel_h + ky) * kernel_w + kx];
    }
    double weight(int o, int i, int ky, int kx) const noexcept {
        return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel_h + ky) * kernel_w + kx];
    }
    /// Throws DimensionError when buffers disagree with the declared shape or
    /// hold non-finite values.
    void validate() const;

    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

/// Kernel sizes and feature widths of the three-layer mapping unit.
struct UnitArchitecture {
    std::array<int, 3> kernels{9, 1, 5};
    int features1 = 64;
    int features2 = 32;

    /// Pixels lost per side by a valid-mode pass through the unit.
    int margin() const noexcept { return (kernels[0] - 1) / 2 + (kernels[1] - 1) / 2 + (kernels[2] - 1) / 2; }
    friend bool operator==(const UnitArchitecture&, const UnitArchitecture&) = default;
};

/// patch extraction (relu) -> non-linear mapping (relu) -> reconstruction (linear).
struct UnitWeights {
    std::array<ConvLayer, 3> layers;

    /// All-zero weights with the given architecture.
    static UnitWeights zeros(const UnitArchitecture& arch = {});
    /// Gaussian(0, stddev) weights, zero biases.
    static UnitWeights random(const UnitArchitecture& arch, std::uint64_t seed, double stddev = 1e-3);
    /// Exact identity on any input: layer 1 splits x into relu(x) and
    /// relu(-x), layer 2 copies both, layer 3 recombines them. Needs at least
    /// two features per hidden layer.
    static UnitWeights pass_through(const UnitArchitecture& arch = {});

    UnitArchitecture architecture() const;
    /// Checks odd kernels, single-channel ends, a consistent channel chain and
    /// the relu/relu/linear activation pattern.
    void validate() const;
    std::size_t parameter_count() const;

    friend bool operator==(const UnitWeights&, const UnitWeights&) = default;
};

/// Ordered progressive stack; `depth_norm` maps depth into [0, 1] for the units.
struct NetworkWeights {
    std::vector<UnitWeights> units;
    double depth_norm = 1.0;

    void validate() const;
    friend bool operator==(const NetworkWeights&, const NetworkWeights&) = default;
};

enum class Optimizer { sgd, adam };

/// Starting point of units after the first in progressive training.
enum class LaterUnitInit { gaussian, pass_through };

struct TrainConfig {
    int sub_image = 33;
    int stride = 14;
    Optimizer optimizer = Optimizer::adam;
    /// Rate for layers 1-2; layer 3 uses learning_rate * last_layer_lr_scale.
    double learning_rate = 3e-3;
    double last_layer_lr_scale = 1.0;
    int epochs = 50;
    int batch = 16;
    std::uint64_t seed = 1;
    double init_stddev = 1e-3;
    /// pass_through starts unit k >= 2 at the identity plus Gaussian(0,
    /// init_stddev) noise, so it begins from the previous stage's output.
    LaterUnitInit later_unit_init = LaterUnitInit::pass_through;
    /// Joint fine-tune of the whole progressive stack after per-unit training.
    int fine_tune_epochs = 0;
    int threads = 1;
    UnitArchitecture architecture{};

    /// Throws ConfigError on invalid values.
    void validate() const;
};

/// One training sample: a square input patch and the target crop aligned with
/// the valid-mode output region.
struct TrainingPair {
    int input_size = 0;
    int target_size = 0;
    std::vector<double> input;
    std::vector<double> target;
};

/// Patches of cfg.sub_image pixels at cfg.stride offsets; the target is the
/// centre crop that survives `margin` pixels of valid convolution per side.
std::vector<TrainingPair> extract_subimages(const DepthMap& hr, const DepthMap& lr_input,
                                            const TrainConfig& cfg, int margin);
std::vector<TrainingPair> extract_subimages(const DepthMap& hr, const DepthMap& lr_input,
                                            const TrainConfig& cfg);

/// Cross-correlation + bias + activation.
Tensor3 conv_forward(const Tensor3& input, const ConvLayer& layer, Padding padding);

/// Inference pass over a [0, 1]-normalized map with replicate padding; the
/// output has the input's dimensions.
DepthMap unit_forward(const DepthMap& input, const UnitWeights& unit);

/// Valid-mode pass of a single patch through a chain of units.
Tensor3 chain_forward_valid(const Tensor3& input, std::span<const UnitWeights> chain);

struct LossAndGradients {
    double loss = 0.0;
    /// Same shape as the chain; each entry holds dLoss/dparam.
    std::vector<UnitWeights> gradients;
};

/// Mean squared error over all target pixels of the batch and its exact
/// gradient with respect to every weight and bias of the chain.
LossAndGradients loss_and_gradients(std::span<const TrainingPair> batch, std::span<const UnitWeights> chain,
                                    int threads = 1);
LossAndGradients loss_and_gradients(std::span<const TrainingPair> batch, const UnitWeights& unit,
                                    int threads = 1);

/// Forward-only MSE over a dataset.
double dataset_loss(std::span<const TrainingPair> data, std::span<const UnitWeights> chain, int threads = 1);

struct TrainReport {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    /// Mean minibatch loss per epoch.
    std::vector<double> epoch_loss;
};

/// Minibatch training of `chain` in place (all units jointly).
void train_chain(std::span<const TrainingPair> dataset, std::span<UnitWeights> chain, const TrainConfig& cfg,
                 TrainReport* report = nullptr);

/// Fresh unit from Gaussian init seeded by `init_seed`, then cfg.epochs of training.
UnitWeights train_unit(std::span<const TrainingPair> dataset, const TrainConfig& cfg, std::uint64_t init_seed,
                       TrainReport* report = nullptr);

/// Trains a copy of `init` for cfg.epochs.
UnitWeights train_unit_from(std::span<const TrainingPair> dataset, const TrainConfig& cfg, UnitWeights init,
                            TrainReport* report = nullptr);

struct ProgressiveReport {
    std::vector<TrainReport> units;
    TrainReport fine_tune;
    std::size_t pairs_per_unit = 0;
};

/// Degrade -> bicubic upscale builds the first-stage inputs; unit k trains on
/// the output of units 1..k-1. depth_norm is the corpus maximum.
NetworkWeights train_progressive(std::span<const DepthMap> corpus, ScaleFactor factor, int n_units,
                                 const TrainConfig& cfg, DegradeMethod method = DegradeMethod::decimate,
                                 ProgressiveReport* report = nullptr);

/// Bicubic upscale, then every unit in order. When `stages` is non-null it
/// receives the bicubic image followed by the output of each unit.
DepthMap progressive_forward(const DepthMap& lr, ScaleFactor factor, const NetworkWeights& net,
                             std::vector<DepthMap>* stages = nullptr);

/// Runs the units on an already upscaled map (no resampling).
DepthMap apply_units(const DepthMap& upscaled, const NetworkWeights& net, std::size_t n_units,
                     std::vector<DepthMap>* stages = nullptr);

void save_weights(const NetworkWeights& net, const std::filesystem::path& path);
NetworkWeights load_weights(const std::filesystem::path& path);

}  // namespace ddsr
