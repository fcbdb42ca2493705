#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>

#include "storewatch/pipeline.hpp"

namespace storewatch::pipeline {

namespace {

// 5x7 glyphs, one byte per row, bit 4 is the leftmost column.
using Glyph = std::array<std::uint8_t, 7>;

const Glyph* glyph(char c) {
  static const Glyph digits[10] = {
      {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
      {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
      {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
      {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
      {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}};
  static const Glyph letters[26] = {
      {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}, {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},
      {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}, {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C},
      {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},
      {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}, {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},
      {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}, {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},
      {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},
      {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}, {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},
      {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},
      {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}, {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},
      {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}, {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},
      {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},
      {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}, {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},
      {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}};
  static const Glyph dash = {0, 0, 0, 0x1F, 0, 0, 0};
  static const Glyph dot = {0, 0, 0, 0, 0, 0x0C, 0x0C};
  static const Glyph colon = {0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0};
  static const Glyph open = {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02};
  static const Glyph close = {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08};

  const auto u = static_cast<unsigned char>(c);
  if (std::isdigit(u)) return &digits[c - '0'];
  if (std::isalpha(u)) return &letters[std::toupper(u) - 'A'];
  switch (c) {
    case '-': return &dash;
    case '.': return &dot;
    case ':': return &colon;
    case '(': return &open;
    case ')': return &close;
    default: return nullptr;
  }
}

using Color = std::array<std::uint8_t, 3>;
constexpr Color kBoxColor{0, 255, 0};
constexpr Color kTextColor{255, 255, 0};
constexpr Color kErrorColor{255, 0, 0};
constexpr int kLineHeight = 9;

void put(RgbImage& img, int x, int y, const Color& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  std::copy(c.begin(), c.end(), img.pixel(x, y));
}

void draw_box(RgbImage& img, const haar::Box& b, const Color& c) {
  for (int x = b.x; x < b.x + b.w; ++x) {
    put(img, x, b.y, c);
    put(img, x, b.y + b.h - 1, c);
  }
  for (int y = b.y; y < b.y + b.h; ++y) {
    put(img, b.x, y, c);
    put(img, b.x + b.w - 1, y, c);
  }
}

void draw_text(RgbImage& img, int x, int y, const std::string& text, const Color& c) {
  for (char ch : text) {
    if (const Glyph* g = glyph(ch)) {
      for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
          if ((*g)[row] & (0x10 >> col)) put(img, x + col, y + row, c);
        }
      }
    }
    x += 6;
  }
}

}  // namespace

RgbImage render_annotations(const RgbImage& frame, const FrameAnnotation& annotation) {
  RgbImage out = frame;
  for (const auto& p : annotation.persons) {
    std::vector<std::string> lines;
    if (p.error) {
      draw_box(out, p.box, kErrorColor);
      lines.push_back("error");
    } else {
      draw_box(out, p.box, kBoxColor);
      char age[32];
      std::snprintf(age, sizeof age, "%.1f", p.age_gender.age_estimate);
      lines.push_back("gender: " + std::string(demographics::to_string(p.age_gender.gender)));
      lines.push_back("age: " + std::string(age) + " (" + std::string(demographics::to_string(p.age_gender.group)) + ")");
      lines.push_back("expression: " + std::string(expression::to_string(p.expression.label)));
    }
    // Captions go below the box, or above it when there is no room.
    int y = p.box.y + p.box.h + 2;
    if (y + kLineHeight * static_cast<int>(lines.size()) > out.height) {
      y = std::max(0, p.box.y - 2 - kLineHeight * static_cast<int>(lines.size()));
    }
    for (const auto& line : lines) {
      draw_text(out, p.box.x, y, line, p.error ? kErrorColor : kTextColor);
      y += kLineHeight;
    }
  }
  return out;
}

}  // namespace storewatch::pipeline
