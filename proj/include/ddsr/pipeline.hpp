#pragma once

#include <optional>
#include <vector>

#include "ddsr/image.hpp"
#include "ddsr/irls.hpp"
#include "ddsr/smoothness.hpp"
#include "ddsr/srcnn.hpp"

namespace ddsr {

struct PipelineConfig {
    SmoothnessConfig smoothness{};
    RefineConfig refine{};
    bool refine_enabled = true;
    int threads = 1;
};

/// Everything produced by one super-resolution run, in stage order.
struct SrResult {
    DepthMap bicubic;
    std::vector<DepthMap> unit_outputs;
    /// Output of the last unit (the unary of the refinement).
    DepthMap cnn;
    std::optional<DepthMap> refined;
    RefineTrace trace;
    GuidanceMode guidance = GuidanceMode::self;

    const DepthMap& output() const { return refined ? *refined : cnn; }
};

/// Smoothness + TV refinement of `unary`. Depth is mapped to
/// [0, cfg.value_scale] using `value_norm` as the full-scale depth, refined,
/// and mapped back.
DepthMap refine_depth(const DepthMap& unary, const GuidanceImage& guide, double value_norm,
                      const SmoothnessConfig& smooth, const RefineConfig& cfg, RefineTrace* trace = nullptr,
                      int threads = 1);

/// Progressive CNN followed (unless disabled) by refinement. A color image
/// selects color guidance; otherwise the CNN output guides itself.
SrResult super_resolve(const DepthMap& lr, ScaleFactor factor, const NetworkWeights& net,
                       const std::optional<ColorImage>& color, const PipelineConfig& cfg);

}  // namespace ddsr
