#pragma once

#include <filesystem>

#include "ddsr/image.hpp"

namespace ddsr {

enum class DepthFormat { pfm, pgm16 };

/// Reads PFM ("Pf", 32-bit float) or PGM ("P2"/"P5", 8/16-bit).
/// PGM code values are kept as-is and the maxval is stored as the map's scale.
DepthMap load_depth(const std::filesystem::path& path);

/// PFM stores 32-bit floats (little-endian); values are rounded to float.
/// pgm16 quantizes linearly over [min, max] to codes 0..65535.
void save_depth(const DepthMap& map, const std::filesystem::path& path,
                DepthFormat format = DepthFormat::pfm);

/// 8-bit gray or RGB(A) PNG; gray is expanded to three equal channels.
ColorImage load_png(const std::filesystem::path& path);
void save_png(const ColorImage& image, const std::filesystem::path& path);

/// Picks the depth format from the extension (.pgm -> pgm16, otherwise pfm).
DepthFormat depth_format_for(const std::filesystem::path& path);

}  // namespace ddsr
