#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "ddsr/image.hpp"

namespace ddsr {

enum class GuidanceMode { color, self };

struct SmoothnessConfig {
    /// Odd side length of the neighbourhood window.
    int window = 7;
    /// Lower bound on the local variances in the kernel denominators.
    double sigma_floor = 1e-4;
    GuidanceMode use_guidance = GuidanceMode::self;

    void validate() const;
};

/// Normalized neighbour weights of one pixel; the centre is not included.
struct AlphaWindow {
    std::size_t center = 0;
    int window = 0;
    std::vector<std::pair<std::size_t, double>> neighbors;
};

/// Compressed-row sparse matrix.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                 std::vector<std::size_t> col_idx, std::vector<double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nonzeros() const noexcept { return values_.size(); }
    std::size_t row_nonzeros(std::size_t r) const { return row_ptr_[r + 1] - row_ptr_[r]; }

    std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
    std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
    std::span<const double> values() const noexcept { return values_; }

    /// y = A x
    std::vector<double> multiply(std::span<const double> x) const;
    /// y = A^T x
    std::vector<double> multiply_transpose(std::span<const double> x) const;
    /// Entry (r, c), zero when not stored.
    double coeff(std::size_t r, std::size_t c) const;

    /// Matrix Market "coordinate real general", 1-based indices.
    void write_matrix_market(const std::filesystem::path& path) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

/// A and b with ||A vec(D) - b||^2 = sum_u (D_u - sum_v alpha_uv D_v)^2.
struct SparseSystem {
    SparseMatrix a;
    std::vector<double> b;
    int width = 0;
    int height = 0;
};

/// Population variance of `values` over the window centred at (x, y),
/// clipped to the image.
double local_variance(std::span<const double> values, int width, int height, int x, int y, int window);

/// Weights of every in-window neighbour v of pixel (x, y):
///   exp(-(Dn_u - Dn_v)^2 / (2 max(var_D(u), floor))) * exp(-(g_u - g_v)^2 / (2 max(var_g(u), floor)))
/// normalized to sum to one, where Dn is the unary depth rescaled to [0, 1].
AlphaWindow alpha_weights(const DepthMap& unary, const GuidanceImage& guide, int x, int y,
                          const SmoothnessConfig& cfg);

/// Row u of A is e_u - sum_v alpha_uv e_v; b = 0.
SparseSystem assemble_system(const DepthMap& unary, const GuidanceImage& guide, const SmoothnessConfig& cfg,
                             int threads = 1);

}  // namespace ddsr
