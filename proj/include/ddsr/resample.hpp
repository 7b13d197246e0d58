#pragma once

#include "ddsr/image.hpp"

namespace ddsr {

/// Keys cubic convolution weight for offset `t` (|t| < 2), a = -0.5.
double cubic_kernel(double t) noexcept;

/// Separable bicubic resampling with pixel-center alignment and clamped
/// borders. Constants are reproduced exactly.
DepthMap resize_bicubic(const DepthMap& map, int out_w, int out_h);

/// Nearest source pixel under pixel-center alignment.
DepthMap resize_nearest(const DepthMap& map, int out_w, int out_h);

enum class DegradeMethod { decimate, box };

struct DegradeResult {
    DepthMap lr;
    /// Size of the top-left region that was actually sampled.
    int cropped_width = 0;
    int cropped_height = 0;
};

/// Crops to the largest region divisible by `factor`, then keeps the top-left
/// pixel (decimate) or the mean (box) of every factor x factor block.
DegradeResult degrade(const DepthMap& hr, ScaleFactor factor,
                      DegradeMethod method = DegradeMethod::decimate);

}  // namespace ddsr
