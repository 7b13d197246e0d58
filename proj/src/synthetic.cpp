#include "ddsr/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "ddsr/errors.hpp"

namespace ddsr {

namespace {

// splitmix64 step; decorrelates consecutive seeds.
std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

template <typename Step>
std::vector<DepthMap> walk_corpus(int count, int width, int height, std::uint64_t seed, Step&& step) {
    if (count < 1 || width < 2 || height < 2) throw DimensionError("walk corpus needs count >= 1 and 2x2 maps");
    std::vector<DepthMap> maps;
    for (int k = 0; k < count; ++k) {
        std::mt19937_64 rng(mix_seed(seed + static_cast<std::uint64_t>(k)));
        std::vector<double> fx(static_cast<std::size_t>(width)), gy(static_cast<std::size_t>(height));
        for (int x = 1; x < width; ++x) fx[static_cast<std::size_t>(x)] = fx[static_cast<std::size_t>(x) - 1] + step(rng);
        for (int y = 1; y < height; ++y) gy[static_cast<std::size_t>(y)] = gy[static_cast<std::size_t>(y) - 1] + step(rng);
        std::vector<double> d(static_cast<std::size_t>(width) * height);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                d[static_cast<std::size_t>(y) * width + x] = fx[static_cast<std::size_t>(x)] + gy[static_cast<std::size_t>(y)];
        maps.emplace_back(width, height, std::move(d));
    }
    return maps;
}

}  // namespace

SyntheticScene make_scene(const SceneOptions& opts, std::uint64_t seed) {
    const int w = opts.width;
    const int h = opts.height;
    if (w < 8 || h < 8) throw DimensionError("synthetic scenes need at least 8x8 pixels");
    if (opts.min_shapes < 0 || opts.max_shapes < opts.min_shapes) throw ConfigError("bad shape count range");

    std::mt19937_64 rng(mix_seed(seed));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    auto integer = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    std::vector<double> depth(static_cast<std::size_t>(w) * h);
    std::vector<int> label(depth.size(), 0);

    // Background plane, far away.
    const double base = uniform(0.6, 0.9);
    const double bx = uniform(-0.1, 0.1) / w;
    const double by = uniform(-0.1, 0.1) / h;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) depth[static_cast<std::size_t>(y) * w + x] = base + bx * x + by * y;

    const int shapes = integer(opts.min_shapes, opts.max_shapes);
    for (int s = 0; s < shapes; ++s) {
        const int rw = integer(std::max(3, w / 8), std::max(4, w / 2));
        const int rh = integer(std::max(3, h / 8), std::max(4, h / 2));
        const int x0 = integer(0, w - rw);
        const int y0 = integer(0, h - rh);
        const double d0 = uniform(0.1, 0.6);
        const bool ramp = unit(rng) < 0.5;
        const double gx = ramp ? uniform(-0.3, 0.3) / rw : 0.0;
        const double gy = ramp ? uniform(-0.3, 0.3) / rh : 0.0;
        for (int y = y0; y < y0 + rh; ++y)
            for (int x = x0; x < x0 + rw; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                depth[i] = std::clamp(d0 + gx * (x - x0) + gy * (y - y0), 0.02, 1.0);
                label[i] = s + 1;
            }
    }

    std::vector<std::array<std::uint8_t, 3>> palette(static_cast<std::size_t>(shapes) + 1);
    for (auto& c : palette)
        for (auto& ch : c) ch = static_cast<std::uint8_t>(integer(20, 235));

    ColorImage color{w, h, std::vector<std::uint8_t>(depth.size() * 3)};
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const auto& c = palette[static_cast<std::size_t>(label[i])];
        for (int ch = 0; ch < 3; ++ch) {
            const double v = c[static_cast<std::size_t>(ch)] + 3.0 * noise(rng);
            color.rgb[3 * i + static_cast<std::size_t>(ch)] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }

    std::vector<double> noisy(depth);
    if (opts.noise_sigma > 0.0) {
        for (double& v : noisy) v += opts.noise_sigma * noise(rng);
    }
    return {DepthMap(w, h, std::move(depth)), DepthMap(w, h, std::move(noisy)), std::move(color)};
}

std::vector<SyntheticScene> make_scenes(const SceneOptions& opts, int count, std::uint64_t seed) {
    std::vector<SyntheticScene> scenes;
    scenes.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int k = 0; k < count; ++k) scenes.push_back(make_scene(opts, mix_seed(seed) + static_cast<std::uint64_t>(k)));
    return scenes;
}

std::vector<DepthMap> laplace_gradient_corpus(int count, int width, int height, double step_scale,
                                              std::uint64_t seed) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    return walk_corpus(count, width, height, seed, [&](std::mt19937_64& rng) {
        const double v = u(rng);
        const double mag = -step_scale * std::log(std::max(1.0 - 2.0 * std::abs(v), 1e-300));
        return v < 0.0 ? -mag : mag;
    });
}

std::vector<DepthMap> uniform_gradient_corpus(int count, int width, int height, double half_width,
                                              std::uint64_t seed) {
    std::uniform_real_distribution<double> u(-half_width, half_width);
    return walk_corpus(count, width, height, seed, [&](std::mt19937_64& rng) { return u(rng); });
}

}  // namespace ddsr
