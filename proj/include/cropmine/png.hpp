#pragma once

#include "cropmine/raster.hpp"

#include <array>
#include <string>

namespace cropmine {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

// Fixed palette for label masks.
inline constexpr Rgb kPaletteUnknown{0, 0, 0};
inline constexpr Rgb kPaletteNonCropland{180, 180, 180};
inline constexpr Rgb kPaletteCropland{34, 139, 34};

/// Color of cluster i out of k: hues evenly spaced around the circle,
/// hue = 360*i/k degrees, saturation 0.65, value 0.95 (HSV -> RGB).
Rgb cluster_color(int index, int k);

/// Write an 8-bit RGB PNG (no alpha) of the same pixel dimensions as the
/// layer. Label kinds use the fixed palette; cluster maps use the k-entry
/// hue palette (k defaults to max code + 1).
void render_png(const LabelMask& layer, const std::string& path, int cluster_k = 0);

/// Grayscale rendering of one raster band, min-max stretched.
void render_band_png(const Raster& raster, int band, const std::string& path);

} // namespace cropmine
