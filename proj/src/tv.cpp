#include "ddsr/tv.hpp"

#include <cmath>

#include <fmt/format.h>

#include "ddsr/errors.hpp"

namespace ddsr {

GradientOperator::GradientOperator(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1 || (width < 2 && height < 2)) {
        throw DimensionError(fmt::format("gradient operator needs at least two pixels along one axis, got {}x{}",
                                         width, height));
    }
}

std::vector<double> GradientOperator::apply(std::span<const double> image) const {
    if (image.size() != cols()) throw DimensionError("gradient: image length mismatch");
    std::vector<double> g(rows());
    std::size_t k = 0;
    for (int y = 0; y < height_; ++y) {
        const double* row = image.data() + static_cast<std::size_t>(y) * width_;
        for (int x = 0; x + 1 < width_; ++x) g[k++] = row[x + 1] - row[x];
    }
    for (int y = 0; y + 1 < height_; ++y) {
        const double* row = image.data() + static_cast<std::size_t>(y) * width_;
        const double* next = row + width_;
        for (int x = 0; x < width_; ++x) g[k++] = next[x] - row[x];
    }
    return g;
}

std::vector<double> GradientOperator::apply_transpose(std::span<const double> gradient) const {
    if (gradient.size() != rows()) throw DimensionError("gradient transpose: length mismatch");
    std::vector<double> out(cols(), 0.0);
    std::size_t k = 0;
    for (int y = 0; y < height_; ++y) {
        double* row = out.data() + static_cast<std::size_t>(y) * width_;
        for (int x = 0; x + 1 < width_; ++x) {
            const double v = gradient[k++];
            row[x + 1] += v;
            row[x] -= v;
        }
    }
    for (int y = 0; y + 1 < height_; ++y) {
        double* row = out.data() + static_cast<std::size_t>(y) * width_;
        double* next = row + width_;
        for (int x = 0; x < width_; ++x) {
            const double v = gradient[k++];
            next[x] += v;
            row[x] -= v;
        }
    }
    return out;
}

std::pair<std::size_t, std::size_t> GradientOperator::row_pixels(std::size_t i) const {
    if (i < horizontal_rows()) {
        const std::size_t y = i / static_cast<std::size_t>(width_ - 1);
        const std::size_t x = i % static_cast<std::size_t>(width_ - 1);
        const std::size_t p = y * static_cast<std::size_t>(width_) + x;
        return {p, p + 1};
    }
    const std::size_t j = i - horizontal_rows();
    if (j >= vertical_rows()) throw DimensionError("gradient row out of range");
    return {j, j + static_cast<std::size_t>(width_)};
}

std::vector<double> apply_gradient(const DepthMap& map) {
    return GradientOperator(map.width(), map.height()).apply(map.values());
}

std::vector<double> apply_gradient_transpose(std::span<const double> gradient, int width, int height) {
    return GradientOperator(width, height).apply_transpose(gradient);
}

double total_variation(const DepthMap& map) {
    double tv = 0.0;
    for (double g : apply_gradient(map)) tv += std::abs(g);
    return tv;
}

RowWeights reweight(std::span<const double> gradient, double epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("IRLS epsilon must be positive");
    RowWeights rw;
    rw.epsilon = epsilon;
    rw.weights.resize(gradient.size());
    for (std::size_t i = 0; i < gradient.size(); ++i) rw.weights[i] = 1.0 / std::sqrt(std::abs(gradient[i]) + epsilon);
    return rw;
}

RowWeights reweight(const DepthMap& current, double epsilon) {
    return reweight(apply_gradient(current), epsilon);
}

}  // namespace ddsr
