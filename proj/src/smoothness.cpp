#include "ddsr/smoothness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "ddsr/errors.hpp"
#include "ddsr/parallel.hpp"

namespace ddsr {

namespace {

struct Grids {
    int width;
    int height;
    std::vector<double> depth;  // unary rescaled to [0, 1]
    std::span<const double> guide;
    std::vector<double> depth_var;
    std::vector<double> guide_var;
};

void require_guide_dims(const DepthMap& unary, const GuidanceImage& guide) {
    if (unary.width() != guide.width() || unary.height() != guide.height()) {
        throw DimensionError(fmt::format("guidance {}x{} does not match depth {}x{}", guide.width(), guide.height(),
                                         unary.width(), unary.height()));
    }
}

Grids prepare(const DepthMap& unary, const GuidanceImage& guide, const SmoothnessConfig& cfg, bool with_variance) {
    Grids g{unary.width(), unary.height(), {}, guide.values(), {}, {}};
    const auto dn = guidance_from_depth(unary);
    g.depth.assign(dn.values().begin(), dn.values().end());
    if (with_variance) {
        const std::size_t n = g.depth.size();
        g.depth_var.resize(n);
        g.guide_var.resize(n);
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * g.width + x;
                g.depth_var[i] = local_variance(g.depth, g.width, g.height, x, y, cfg.window);
                g.guide_var[i] = local_variance(g.guide, g.width, g.height, x, y, cfg.window);
            }
    }
    return g;
}

AlphaWindow weights_at(const Grids& g, int x, int y, double depth_var, double guide_var, const SmoothnessConfig& cfg) {
    const int r = cfg.window / 2;
    const std::size_t u = static_cast<std::size_t>(y) * g.width + x;
    const double sd = 2.0 * std::max(depth_var, cfg.sigma_floor);
    const double sg = 2.0 * std::max(guide_var, cfg.sigma_floor);

    AlphaWindow aw;
    aw.center = u;
    aw.window = cfg.window;
    std::vector<double> expo;
    double top = -std::numeric_limits<double>::infinity();
    for (int vy = std::max(0, y - r); vy <= std::min(g.height - 1, y + r); ++vy) {
        for (int vx = std::max(0, x - r); vx <= std::min(g.width - 1, x + r); ++vx) {
            const std::size_t v = static_cast<std::size_t>(vy) * g.width + vx;
            if (v == u) continue;
            const double dd = g.depth[u] - g.depth[v];
            const double dg = g.guide[u] - g.guide[v];
            const double e = -(dd * dd) / sd - (dg * dg) / sg;
            aw.neighbors.emplace_back(v, 0.0);
            expo.push_back(e);
            top = std::max(top, e);
        }
    }
    // Shifted by the largest exponent so the normalizer never underflows.
    double total = 0.0;
    for (std::size_t k = 0; k < expo.size(); ++k) {
        aw.neighbors[k].second = std::exp(expo[k] - top);
        total += aw.neighbors[k].second;
    }
    for (auto& nb : aw.neighbors) nb.second /= total;
    return aw;
}

}  // namespace

void SmoothnessConfig::validate() const {
    if (window < 3 || window % 2 == 0) throw ConfigError(fmt::format("window must be odd and >= 3, got {}", window));
    if (!(sigma_floor > 0.0)) throw ConfigError("sigma_floor must be positive");
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                           std::vector<std::size_t> col_idx, std::vector<double> values)
    : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
    if (row_ptr_.size() != rows_ + 1 || row_ptr_.front() != 0 || row_ptr_.back() != values_.size() ||
        col_idx_.size() != values_.size()) {
        throw DimensionError("inconsistent CSR buffers");
    }
    for (std::size_t c : col_idx_)
        if (c >= cols_) throw DimensionError("CSR column index out of range");
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
    if (x.size() != cols_) throw DimensionError("sparse multiply: vector length mismatch");
    std::vector<double> y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        double acc = 0.0;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += values_[k] * x[col_idx_[k]];
        y[r] = acc;
    }
    return y;
}

std::vector<double> SparseMatrix::multiply_transpose(std::span<const double> x) const {
    if (x.size() != rows_) throw DimensionError("sparse transpose multiply: vector length mismatch");
    std::vector<double> y(cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        const double xr = x[r];
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) y[col_idx_[k]] += values_[k] * xr;
    }
    return y;
}

double SparseMatrix::coeff(std::size_t r, std::size_t c) const {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
        if (col_idx_[k] == c) return values_[k];
    return 0.0;
}

void SparseMatrix::write_matrix_market(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << rows_ << ' ' << cols_ << ' ' << values_.size() << '\n';
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            out << fmt::format("{} {} {}\n", r + 1, col_idx_[k] + 1, values_[k]);
    if (!out) throw IoError("write failed: " + path.string());
}

double local_variance(std::span<const double> values, int width, int height, int x, int y, int window) {
    const int r = window / 2;
    const int x0 = std::max(0, x - r), x1 = std::min(width - 1, x + r);
    const int y0 = std::max(0, y - r), y1 = std::min(height - 1, y + r);
    double mean = 0.0;
    for (int vy = y0; vy <= y1; ++vy)
        for (int vx = x0; vx <= x1; ++vx) mean += values[static_cast<std::size_t>(vy) * width + vx];
    const double n = static_cast<double>((x1 - x0 + 1) * (y1 - y0 + 1));
    mean /= n;
    double var = 0.0;
    for (int vy = y0; vy <= y1; ++vy)
        for (int vx = x0; vx <= x1; ++vx) {
            const double d = values[static_cast<std::size_t>(vy) * width + vx] - mean;
            var += d * d;
        }
    return var / n;
}

AlphaWindow alpha_weights(const DepthMap& unary, const GuidanceImage& guide, int x, int y,
                          const SmoothnessConfig& cfg) {
    cfg.validate();
    require_guide_dims(unary, guide);
    if (x < 0 || y < 0 || x >= unary.width() || y >= unary.height()) throw DimensionError("pixel out of bounds");
    if (unary.size() < 2) throw DimensionError("smoothness needs at least two pixels");
    const Grids g = prepare(unary, guide, cfg, false);
    return weights_at(g, x, y, local_variance(g.depth, g.width, g.height, x, y, cfg.window),
                      local_variance(g.guide, g.width, g.height, x, y, cfg.window), cfg);
}

SparseSystem assemble_system(const DepthMap& unary, const GuidanceImage& guide, const SmoothnessConfig& cfg,
                             int threads) {
    cfg.validate();
    require_guide_dims(unary, guide);
    if (unary.size() < 2) throw DimensionError("smoothness needs at least two pixels");
    const Grids g = prepare(unary, guide, cfg, true);
    const std::size_t n = unary.size();

    std::vector<AlphaWindow> rows(n);
    parallel_for(n, threads, [&](std::size_t u) {
        const int x = static_cast<int>(u % static_cast<std::size_t>(g.width));
        const int y = static_cast<int>(u / static_cast<std::size_t>(g.width));
        rows[u] = weights_at(g, x, y, g.depth_var[u], g.guide_var[u], cfg);
    });

    std::vector<std::size_t> row_ptr(n + 1, 0);
    for (std::size_t u = 0; u < n; ++u) row_ptr[u + 1] = row_ptr[u] + rows[u].neighbors.size() + 1;
    std::vector<std::size_t> cols(row_ptr.back());
    std::vector<double> vals(row_ptr.back());
    for (std::size_t u = 0; u < n; ++u) {
        // Neighbours come out in raster order; splice the diagonal in place.
        std::size_t k = row_ptr[u];
        bool diag = false;
        for (const auto& [v, w] : rows[u].neighbors) {
            if (!diag && v > u) {
                cols[k] = u;
                vals[k++] = 1.0;
                diag = true;
            }
            cols[k] = v;
            vals[k++] = -w;
        }
        if (!diag) {
            cols[k] = u;
            vals[k] = 1.0;
        }
    }
    return {SparseMatrix(n, n, std::move(row_ptr), std::move(cols), std::move(vals)), std::vector<double>(n, 0.0),
            unary.width(), unary.height()};
}

}  // namespace ddsr
