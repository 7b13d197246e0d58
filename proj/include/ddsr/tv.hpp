#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ddsr/image.hpp"

namespace ddsr {

/// Forward-difference operator P. Rows are the horizontal differences
/// D(x+1, y) - D(x, y) in raster order, followed by the vertical differences
/// D(x, y+1) - D(x, y) in raster order; the last column / row has no row.
class GradientOperator {
public:
    GradientOperator(int width, int height);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t rows() const noexcept { return horizontal_rows() + vertical_rows(); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    std::size_t horizontal_rows() const noexcept { return static_cast<std::size_t>(height_) * (width_ - 1); }
    std::size_t vertical_rows() const noexcept { return static_cast<std::size_t>(width_) * (height_ - 1); }

    /// P x
    std::vector<double> apply(std::span<const double> image) const;
    /// P^T g
    std::vector<double> apply_transpose(std::span<const double> gradient) const;
    /// The two pixels {minus, plus} touched by row i.
    std::pair<std::size_t, std::size_t> row_pixels(std::size_t i) const;

private:
    int width_;
    int height_;
};

std::vector<double> apply_gradient(const DepthMap& map);
std::vector<double> apply_gradient_transpose(std::span<const double> gradient, int width, int height);

/// Anisotropic total variation ||P vec(D)||_1.
double total_variation(const DepthMap& map);

/// IRLS row weights 1 / sqrt(|g_i| + epsilon).
struct RowWeights {
    std::vector<double> weights;
    double epsilon = 1e-4;
};

RowWeights reweight(std::span<const double> gradient, double epsilon);
RowWeights reweight(const DepthMap& current, double epsilon);

}  // namespace ddsr
