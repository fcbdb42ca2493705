#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "storewatch/image.hpp"

namespace storewatch::io {

/// Binary PPM (P6, maxval 255). Throws FormatError on a malformed header and
/// TruncationError when the raster is short.
RgbImage parse_ppm(std::span<const std::uint8_t> bytes);
RgbImage read_ppm(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_ppm(const RgbImage& img);
void write_ppm(const RgbImage& img, const std::filesystem::path& path);

bool png_supported() noexcept;
/// Throws UnsupportedFeatureError when built without libpng.
RgbImage read_png(const std::filesystem::path& path);

/// Dispatches on extension (.ppm, .png).
RgbImage read_image(const std::filesystem::path& path);

}  // namespace storewatch::io
