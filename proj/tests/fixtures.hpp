#pragma once

#include <filesystem>
#include <string>

#include "storewatch/haar.hpp"
#include "storewatch/image.hpp"

namespace fixture {

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(STOREWATCH_TEST_DATA) / name; }

// One stage, one stump: weights -1 over the whole 24x24 window and +2 over
// its right half, so the feature is right-half sum minus left-half sum.
// Hand arithmetic for the dark-left / bright-right pattern exactly aligned:
//   feature = 255 * 12 * 24 = 73440
//   inset window 22x22 (area 484): 11 columns of 0, 11 of 255, std = 127.5
//   feature / (std * area) = 73440 / 61710 = 1.190 >= 1.17  -> right (+1)
// A constant window has feature 0 and std 1, so it goes left (-1) and fails.
// The background is a 118/138 checkerboard rather than flat gray: a flat
// inset has std 1, which would let a pattern sliver in the 1-pixel border
// fire. Over the checkerboard the best misaligned window scores 1.140.
inline storewatch::haar::Cascade two_rect_cascade() {
  storewatch::haar::WeakClassifier weak;
  weak.rects = {{0, 0, 24, 24, -1.0}, {12, 0, 12, 24, 2.0}};
  weak.threshold = 1.17;
  weak.left_value = -1.0;
  weak.right_value = 1.0;
  storewatch::haar::Cascade c;
  c.window_width = c.window_height = 24;
  c.stages.push_back({{weak}, 0.0});
  return c;
}

inline std::uint8_t background(int x, int y) { return (x + y) % 2 ? 118 : 138; }

inline storewatch::GrayImage blank_gray(int w, int h) {
  storewatch::GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = background(x, y);
  return img;
}

inline storewatch::RgbImage blank_rgb(int w, int h) {
  storewatch::RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto* p = img.pixel(x, y);
      p[0] = p[1] = p[2] = background(x, y);
    }
  return img;
}

// 24x24 contrast pattern (left half 0, right half 255) pasted at (x, y).
inline void paste_pattern(storewatch::GrayImage& img, int x, int y, int side = 24) {
  for (int yy = 0; yy < side; ++yy)
    for (int xx = 0; xx < side; ++xx) img.at(x + xx, y + yy) = xx < side / 2 ? 0 : 255;
}

inline void paste_pattern(storewatch::RgbImage& img, int x, int y, int side = 24) {
  for (int yy = 0; yy < side; ++yy)
    for (int xx = 0; xx < side; ++xx) {
      auto* p = img.pixel(x + xx, y + yy);
      p[0] = p[1] = p[2] = xx < side / 2 ? 0 : 255;
    }
}

inline storewatch::GrayImage pattern_image() {
  auto img = blank_gray(96, 72);
  paste_pattern(img, 40, 24);
  return img;
}

}  // namespace fixture
