#include "ddsr/pipeline.hpp"

#include <fmt/format.h>

#include "ddsr/errors.hpp"

namespace ddsr {

DepthMap refine_depth(const DepthMap& unary, const GuidanceImage& guide, double value_norm,
                      const SmoothnessConfig& smooth, const RefineConfig& cfg, RefineTrace* trace, int threads) {
    cfg.validate();
    if (!(value_norm > 0.0)) throw ConfigError("value_norm must be positive");
    const double k = cfg.value_scale / value_norm;

    std::vector<double> scaled(unary.values().begin(), unary.values().end());
    for (double& v : scaled) v *= k;
    const DepthMap unary_scaled = unary.with_values(std::move(scaled));

    const SparseSystem sys = assemble_system(unary_scaled, guide, smooth, threads);
    auto [refined, tr] = irls_refine(unary_scaled, sys, cfg);
    if (trace != nullptr) *trace = std::move(tr);

    std::vector<double> out(refined.values().begin(), refined.values().end());
    for (double& v : out) v /= k;
    return unary.with_values(std::move(out));
}

SrResult super_resolve(const DepthMap& lr, ScaleFactor factor, const NetworkWeights& net,
                       const std::optional<ColorImage>& color, const PipelineConfig& cfg) {
    SrResult res;
    std::vector<DepthMap> stages;
    res.cnn = progressive_forward(lr, factor, net, &stages);
    res.bicubic = stages.front();
    res.unit_outputs.assign(stages.begin() + 1, stages.end());
    if (!cfg.refine_enabled) return res;

    GuidanceImage guide;
    if (color) {
        if (color->width != res.cnn.width() || color->height != res.cnn.height()) {
            throw DimensionError(fmt::format("guide image is {}x{} but the upscaled depth is {}x{}", color->width,
                                             color->height, res.cnn.width(), res.cnn.height()));
        }
        guide = guidance_from_color(*color);
        res.guidance = GuidanceMode::color;
    } else {
        guide = guidance_from_depth(res.cnn);
        res.guidance = GuidanceMode::self;
    }
    res.refined = refine_depth(res.cnn, guide, net.depth_norm, cfg.smoothness, cfg.refine, &res.trace, cfg.threads);
    return res;
}

}  // namespace ddsr
