#pragma once

#include <cstdint>
#include <vector>

#include "ddsr/image.hpp"

namespace ddsr {

struct SceneOptions {
    int width = 64;
    int height = 64;
    int min_shapes = 3;
    int max_shapes = 6;
    /// Gaussian noise added on top of the piecewise-planar depth.
    double noise_sigma = 0.01;
};

/// Piecewise planar depth (tilted background, rectangles that are either flat
/// or ramped) and a registered color image whose regions share the depth
/// segmentation.
struct SyntheticScene {
    DepthMap clean;
    DepthMap depth;
    ColorImage color;
};

SyntheticScene make_scene(const SceneOptions& opts, std::uint64_t seed);

/// `count` scenes from consecutive seeds derived from `seed`.
std::vector<SyntheticScene> make_scenes(const SceneOptions& opts, int count, std::uint64_t seed);

/// Maps D(x, y) = f(x) + g(y), where f and g are random walks whose steps are
/// Laplace(0, step_scale) distributed, so every forward difference is Laplace.
std::vector<DepthMap> laplace_gradient_corpus(int count, int width, int height, double step_scale,
                                              std::uint64_t seed);

/// Same construction with steps uniform on [-half_width, half_width].
std::vector<DepthMap> uniform_gradient_corpus(int count, int width, int height, double half_width,
                                              std::uint64_t seed);

}  // namespace ddsr
