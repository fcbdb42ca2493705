#include "storewatch/face_input.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "storewatch/error.hpp"

namespace storewatch {

namespace {

struct Tap {
  int lo, hi;
  float frac;
};

std::vector<Tap> taps(int extent, std::size_t side) {
  std::vector<Tap> out(side);
  const double ratio = static_cast<double>(extent) / static_cast<double>(side);
  for (std::size_t i = 0; i < side; ++i) {
    double s = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(extent - 1));
    const int lo = static_cast<int>(std::floor(s));
    out[i] = {lo, std::min(lo + 1, extent - 1), static_cast<float>(s - lo)};
  }
  return out;
}

template <typename Sample>
Tensor resample(const CropRegion& region, std::size_t side, std::size_t channels, Sample sample) {
  if (region.width() <= 0 || region.height() <= 0) throw GeometryError("crop region has zero area");
  if (side == 0) throw GeometryError("output side must be positive");
  const auto ys = taps(region.height(), side);
  const auto xs = taps(region.width(), side);
  Tensor out({side, side, channels});
  for (std::size_t i = 0; i < side; ++i) {
    const auto& ty = ys[i];
    for (std::size_t j = 0; j < side; ++j) {
      const auto& tx = xs[j];
      for (std::size_t c = 0; c < channels; ++c) {
        const float a = sample(region.x0 + tx.lo, region.y0 + ty.lo, c);
        const float b = sample(region.x0 + tx.hi, region.y0 + ty.lo, c);
        const float d = sample(region.x0 + tx.lo, region.y0 + ty.hi, c);
        const float e = sample(region.x0 + tx.hi, region.y0 + ty.hi, c);
        const float top = a + (b - a) * tx.frac;
        const float bottom = d + (e - d) * tx.frac;
        out.at(i, j, c) = top + (bottom - top) * ty.frac;
      }
    }
  }
  return out;
}

}  // namespace

CropRegion expand_box(const haar::Box& box, double margin, int frame_width, int frame_height) {
  if (!(margin >= 0.0)) throw DomainError("crop margin must be non-negative");
  const double mx = margin * box.w, my = margin * box.h;
  CropRegion r;
  r.x0 = std::clamp(static_cast<int>(std::lround(box.x - mx)), 0, frame_width);
  r.y0 = std::clamp(static_cast<int>(std::lround(box.y - my)), 0, frame_height);
  r.x1 = std::clamp(static_cast<int>(std::lround(box.x + box.w + mx)), 0, frame_width);
  r.y1 = std::clamp(static_cast<int>(std::lround(box.y + box.h + my)), 0, frame_height);
  if (r.width() <= 0 || r.height() <= 0) {
    throw GeometryError("box (" + std::to_string(box.x) + ", " + std::to_string(box.y) + ", " + std::to_string(box.w) +
                        ", " + std::to_string(box.h) + ") has zero area inside the " + std::to_string(frame_width) +
                        "x" + std::to_string(frame_height) + " frame");
  }
  return r;
}

Tensor resize_rgb(const RgbImage& frame, const CropRegion& region, std::size_t side) {
  return resample(region, side, 3, [&](int x, int y, std::size_t c) {
    return static_cast<float>(frame.pixel(x, y)[c]);
  });
}

Tensor resize_gray(const RgbImage& frame, const CropRegion& region, std::size_t side) {
  return resample(region, side, 1, [&](int x, int y, std::size_t) {
    const auto* p = frame.pixel(x, y);
    return static_cast<float>(luma(p[0], p[1], p[2]));
  });
}

}  // namespace storewatch
