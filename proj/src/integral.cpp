#include <string>

#include "storewatch/error.hpp"
#include "storewatch/haar.hpp"

namespace storewatch::haar {

IntegralImage::IntegralImage(const GrayImage& img) : width_(img.width), height_(img.height) {
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  sum_.assign(stride * (static_cast<std::size_t>(height_) + 1), 0);
  sq_sum_.assign(sum_.size(), 0);
  for (int y = 0; y < height_; ++y) {
    std::int64_t row = 0, row_sq = 0;
    for (int x = 0; x < width_; ++x) {
      const std::int64_t p = img.at(x, y);
      row += p;
      row_sq += p * p;
      sum_[index(y + 1, x + 1)] = sum_[index(y, x + 1)] + row;
      sq_sum_[index(y + 1, x + 1)] = sq_sum_[index(y, x + 1)] + row_sq;
    }
  }
}

IntegralImage compute_integral(const GrayImage& img) { return IntegralImage(img); }

namespace {

void check_rect(const IntegralImage& ii, int x, int y, int w, int h) {
  if (w <= 0 || h <= 0 || x < 0 || y < 0 || x > ii.width() - w || y > ii.height() - h) {
    throw BoundsError("rect (" + std::to_string(x) + ", " + std::to_string(y) + ", " + std::to_string(w) + ", " +
                      std::to_string(h) + ") is empty or outside the " + std::to_string(ii.width()) + "x" +
                      std::to_string(ii.height()) + " image");
  }
}

}  // namespace

std::int64_t rect_sum(const IntegralImage& ii, int x, int y, int w, int h) {
  check_rect(ii, x, y, w, h);
  return ii.sum(y + h, x + w) - ii.sum(y, x + w) - ii.sum(y + h, x) + ii.sum(y, x);
}

std::int64_t rect_sq_sum(const IntegralImage& ii, int x, int y, int w, int h) {
  check_rect(ii, x, y, w, h);
  return ii.sq_sum(y + h, x + w) - ii.sq_sum(y, x + w) - ii.sq_sum(y + h, x) + ii.sq_sum(y, x);
}

}  // namespace storewatch::haar
