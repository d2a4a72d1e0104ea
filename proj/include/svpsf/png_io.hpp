#pragma once

#include <array>
#include <filesystem>

#include "svpsf/image.hpp"

namespace svpsf {

// Grayscale PNG as raw levels: 0..255 for 8-bit files, 0..65535 for 16-bit files.
// Color files are converted to luminance.
Image read_png(const std::filesystem::path& path, int* bit_depth = nullptr);

// Values are rounded to the nearest level and clamped to [0, 65535].
void write_png16(const std::filesystem::path& path, const Image& image);

// Maps [lo, hi] onto 0..65535 (hi <= lo maps everything to 0).
void write_png16_scaled(const std::filesystem::path& path, const Image& image, double lo, double hi);

// 8-bit RGB rendering of [lo, hi] through a perceptual blue-to-yellow colormap.
void write_png_colormap(const std::filesystem::path& path, const Image& image, double lo, double hi);

}  // namespace svpsf
