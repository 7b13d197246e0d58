#include "ddsr/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddsr/errors.hpp"

namespace ddsr {

namespace {

void check_dims(int width, int height, std::size_t n) {
    if (width <= 0 || height <= 0) {
        throw DimensionError("image dimensions must be positive, got " + std::to_string(width) +
                             "x" + std::to_string(height));
    }
    if (n != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw DimensionError("data length " + std::to_string(n) + " does not match " +
                             std::to_string(width) + "x" + std::to_string(height));
    }
}

}  // namespace

DepthMap::DepthMap(int width, int height, std::vector<double> data, double scale)
    : width_(width), height_(height), data_(std::move(data)), scale_(scale) {
    check_dims(width_, height_, data_.size());
    if (!(scale_ > 0.0) || !std::isfinite(scale_)) {
        throw DataError("depth scale must be positive and finite");
    }
    for (double v : data_) {
        if (!std::isfinite(v)) throw DataError("depth map contains non-finite values");
    }
}

DepthMap::DepthMap(int width, int height, double value, double scale)
    : DepthMap(width, height,
               std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                       static_cast<std::size_t>(std::max(height, 0)),
                                   value),
               scale) {}

double DepthMap::min_value() const {
    if (data_.empty()) throw DimensionError("empty depth map");
    return *std::min_element(data_.begin(), data_.end());
}

double DepthMap::max_value() const {
    if (data_.empty()) throw DimensionError("empty depth map");
    return *std::max_element(data_.begin(), data_.end());
}

DepthMap DepthMap::with_values(std::vector<double> data) const {
    return DepthMap(width_, height_, std::move(data), scale_);
}

GuidanceImage::GuidanceImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width_, height_, data_.size());
    for (double& v : data_) {
        if (!std::isfinite(v)) throw DataError("guidance image contains non-finite values");
        v = std::clamp(v, 0.0, 1.0);
    }
}

ScaleFactor::ScaleFactor(int factor) : factor_(factor) {
    if (factor != 2 && factor != 3 && factor != 4 && factor != 8) {
        throw ConfigError("scale factor must be one of 2, 3, 4, 8; got " + std::to_string(factor));
    }
}

GuidanceImage guidance_from_color(const ColorImage& color) {
    if (color.width <= 0 || color.height <= 0) {
        throw DimensionError("color image has zero size");
    }
    const std::size_t n = static_cast<std::size_t>(color.width) * color.height;
    if (color.rgb.size() != 3 * n) throw DimensionError("color buffer does not match dimensions");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = color.rgb[3 * i];
        const double gr = color.rgb[3 * i + 1];
        const double b = color.rgb[3 * i + 2];
        g[i] = (0.299 * r + 0.587 * gr + 0.114 * b) / 255.0;
    }
    return GuidanceImage(color.width, color.height, std::move(g));
}

GuidanceImage guidance_from_depth(const DepthMap& map) {
    const double lo = map.min_value();
    const double hi = map.max_value();
    std::vector<double> g(map.size(), 0.5);
    if (hi > lo) {
        const double inv = 1.0 / (hi - lo);
        for (std::size_t i = 0; i < map.size(); ++i) g[i] = (map[i] - lo) * inv;
    }
    return GuidanceImage(map.width(), map.height(), std::move(g));
}

}  // namespace ddsr
