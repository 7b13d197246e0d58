#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ddsr {

/// Single-channel depth grid, row-major. `scale` records the divisor that maps
/// stored values back to a normalized range (1.0 for raw float data, the PGM
/// maxval for integer-coded files).
class DepthMap {
public:
    DepthMap() = default;
    DepthMap(int width, int height, std::vector<double> data, double scale = 1.0);
    /// Constant-valued map.
    DepthMap(int width, int height, double value, double scale = 1.0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    double scale() const noexcept { return scale_; }
    bool empty() const noexcept { return data_.empty(); }

    double at(int x, int y) const noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    std::span<const double> values() const noexcept { return data_; }

    double min_value() const;
    double max_value() const;

    /// Same geometry and scale, new values.
    DepthMap with_values(std::vector<double> data) const;

    friend bool operator==(const DepthMap&, const DepthMap&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
    double scale_ = 1.0;
};

/// Intensity grid in [0, 1] that modulates the smoothness weights.
class GuidanceImage {
public:
    GuidanceImage() = default;
    /// Values are clamped into [0, 1].
    GuidanceImage(int width, int height, std::vector<double> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    double at(int x, int y) const noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    std::span<const double> values() const noexcept { return data_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

/// Interleaved 8-bit RGB.
struct ColorImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;
};

/// Integer up-sampling factor. Only the factors the pipeline is trained for
/// are accepted.
class ScaleFactor {
public:
    explicit ScaleFactor(int factor);
    int value() const noexcept { return factor_; }
    friend bool operator==(ScaleFactor, ScaleFactor) = default;

private:
    int factor_;
};

/// Luma (0.299R + 0.587G + 0.114B) / 255.
GuidanceImage guidance_from_color(const ColorImage& color);

/// Min-max rescale of depth into [0, 1]; a constant map becomes all 0.5.
GuidanceImage guidance_from_depth(const DepthMap& map);

}  // namespace ddsr
