#pragma once

#include "storewatch/haar.hpp"
#include "storewatch/image.hpp"
#include "storewatch/tensor.hpp"

namespace storewatch {

/// Half-open pixel region [x0, x1) x [y0, y1).
struct CropRegion {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  bool operator==(const CropRegion&) const = default;
};

/// Grows `box` by margin * width (left/right) and margin * height (top/bottom),
/// rounds to whole pixels and clamps to the frame. Throws GeometryError if
/// nothing is left.
CropRegion expand_box(const haar::Box& box, double margin, int frame_width, int frame_height);

/// Bilinear resample of `region` to side x side x 3 using half-pixel centres
/// and edge clamping. Values stay in [0, 255].
Tensor resize_rgb(const RgbImage& frame, const CropRegion& region, std::size_t side);

/// Same sampling over the luma of each pixel, side x side x 1, values in [0, 255].
Tensor resize_gray(const RgbImage& frame, const CropRegion& region, std::size_t side);

}  // namespace storewatch
