#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddsr/image.hpp"

namespace ddsr {

struct MetricReport {
    double rmse = 0.0;
    double mae = 0.0;
    double ssim = 1.0;
    std::size_t n = 0;

    /// {"rmse":..,"mae":..,"ssim":..,"n":..}
    std::string to_json() const;
    /// rmse,mae,ssim,n
    std::string to_csv() const;
};

double rmse(const DepthMap& obs, const DepthMap& gt);
double mae(const DepthMap& obs, const DepthMap& gt);

/// Mean local SSIM over all fully-contained 11x11 Gaussian (sigma 1.5)
/// windows with C1 = (0.01 L)^2, C2 = (0.03 L)^2. Images smaller than the
/// window use the largest odd window that fits.
/// Throws DegenerateError when L == 0 and the maps differ.
double ssim(const DepthMap& obs, const DepthMap& gt, double dynamic_range);
/// Uses max - min of `gt` as the dynamic range.
double ssim(const DepthMap& obs, const DepthMap& gt);

/// All three metrics; SSIM uses the ground-truth dynamic range.
MetricReport evaluate(const DepthMap& obs, const DepthMap& gt);

/// Per-pixel |obs - gt|.
DepthMap abs_difference(const DepthMap& obs, const DepthMap& gt);

struct LaplaceFit {
    double location = 0.0;
    double scale = 1.0;
    double fit_rmse = 0.0;
    std::size_t samples = 0;
    /// Bin edges span [-1, 1]; `histogram` is the empirical mass per bin and
    /// `density` the fitted Laplace mass per bin.
    std::vector<double> histogram;
    std::vector<double> density;
};

inline constexpr double kLaplaceScaleFloor = 1e-6;

/// Median / mean-absolute-deviation fit of a Laplace law to `samples`,
/// scored as RMSE between per-bin mass over [-1, 1] and the integrated density.
LaplaceFit fit_laplace(std::span<const double> samples, int bins);

/// Forward-difference gradients along both axes, pooled over the corpus after
/// one joint min-max normalization of all maps to [0, 1].
std::vector<double> pooled_gradients(std::span<const DepthMap> maps);

LaplaceFit gradient_laplace_fit(std::span<const DepthMap> maps, int bins);

}  // namespace ddsr
