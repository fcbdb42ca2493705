#include "storewatch/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "storewatch/error.hpp"

namespace storewatch {

namespace {

void check_extent(int w, int h, std::size_t channels, std::size_t actual) {
  if (w <= 0 || h <= 0) {
    throw GeometryError("image extent must be positive, got " + std::to_string(w) + "x" + std::to_string(h));
  }
  if (static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels != actual) {
    throw ShapeError("image " + std::to_string(w) + "x" + std::to_string(h) + "x" + std::to_string(channels) +
                     " does not match " + std::to_string(actual) + " bytes");
  }
}

}  // namespace

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(std::max(w, 0)) * static_cast<std::size_t>(std::max(h, 0)), fill) {
  check_extent(w, h, 1, pixels.size());
}

GrayImage::GrayImage(int w, int h, std::vector<std::uint8_t> data) : width(w), height(h), pixels(std::move(data)) {
  check_extent(w, h, 1, pixels.size());
}

RgbImage::RgbImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(std::max(w, 0)) * static_cast<std::size_t>(std::max(h, 0)) * 3, fill) {
  check_extent(w, h, 3, pixels.size());
}

RgbImage::RgbImage(int w, int h, std::vector<std::uint8_t> data) : width(w), height(h), pixels(std::move(data)) {
  check_extent(w, h, 3, pixels.size());
}

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  // Integer form of the 0.299/0.587/0.114 weights keeps rounding exact.
  const int weighted = 299 * r + 587 * g + 114 * b;
  return static_cast<std::uint8_t>((weighted + 500) / 1000);
}

GrayImage to_gray(const RgbImage& rgb) {
  GrayImage gray(rgb.width, rgb.height);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    gray.pixels[i] = luma(rgb.pixels[3 * i], rgb.pixels[3 * i + 1], rgb.pixels[3 * i + 2]);
  }
  return gray;
}

}  // namespace storewatch
