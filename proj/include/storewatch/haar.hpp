#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "storewatch/image.hpp"

// Haar-cascade face detection: cascade model, integral images, window
// evaluation, multi-scale scanning and rectangle grouping.
namespace storewatch::haar {

struct WeightedRect {
  int x = 0, y = 0, w = 0, h = 0;
  double weight = 0.0;

  bool operator==(const WeightedRect&) const = default;
};

/// Single-node decision stump over one Haar feature.
struct WeakClassifier {
  std::vector<WeightedRect> rects;  // 1..3
  double threshold = 0.0;
  double left_value = 0.0;
  double right_value = 0.0;

  bool operator==(const WeakClassifier&) const = default;
};

struct Stage {
  std::vector<WeakClassifier> weak_classifiers;
  double stage_threshold = 0.0;

  bool operator==(const Stage&) const = default;
};

struct Cascade {
  int window_width = 0;
  int window_height = 0;
  std::vector<Stage> stages;

  std::size_t classifier_count() const;
  bool operator==(const Cascade&) const = default;
};

/// Accepts the legacy stump-tree schema (`<size>`, `<trees>`, `<left_val>`)
/// and the newer `opencv-cascade-classifier` schema with stump-only trees.
/// Throws ParseError on malformed XML and UnsupportedFeatureError on tilted
/// features, non-stump trees or non-Haar feature types.
Cascade parse_cascade_xml(std::string_view text);
Cascade load_cascade(const std::filesystem::path& path);

/// Prefix-sum tables with one extra zero row and column.
class IntegralImage {
 public:
  IntegralImage() = default;
  explicit IntegralImage(const GrayImage& img);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  /// Sum of pixels strictly above and left of (y, x); 0 <= y <= height, 0 <= x <= width.
  std::int64_t sum(int y, int x) const { return sum_[index(y, x)]; }
  std::int64_t sq_sum(int y, int x) const { return sq_sum_[index(y, x)]; }

  std::span<const std::int64_t> sum_table() const noexcept { return sum_; }
  std::span<const std::int64_t> sq_sum_table() const noexcept { return sq_sum_; }

 private:
  std::size_t index(int y, int x) const noexcept {
    return static_cast<std::size_t>(y) * (static_cast<std::size_t>(width_) + 1) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::int64_t> sum_;
  std::vector<std::int64_t> sq_sum_;
};

IntegralImage compute_integral(const GrayImage& img);

/// Pixel sum over [x, x+w) x [y, y+h). Throws BoundsError for empty or
/// out-of-image rectangles.
std::int64_t rect_sum(const IntegralImage& ii, int x, int y, int w, int h);
std::int64_t rect_sq_sum(const IntegralImage& ii, int x, int y, int w, int h);

/// Cascade with feature rectangles rounded to one scale. Building it once per
/// scale keeps the per-window evaluation to table lookups.
class ScaledCascade {
 public:
  ScaledCascade(const Cascade& cascade, double scale);

  double scale() const noexcept { return scale_; }
  int window_width() const noexcept { return window_w_; }
  int window_height() const noexcept { return window_h_; }
  /// Pixels needed right of / below the window origin, including any
  /// rounding overhang of feature rectangles.
  int extent_width() const noexcept { return extent_w_; }
  int extent_height() const noexcept { return extent_h_; }

  bool evaluate(const IntegralImage& ii, int x, int y) const;

 private:
  struct Rect {
    int x, y, w, h;
    double weight;
  };
  struct Node {
    std::vector<Rect> rects;
    double threshold, left, right;
  };
  struct Level {
    std::vector<Node> nodes;
    double threshold;
  };

  double scale_;
  int window_w_, window_h_;
  int extent_w_, extent_h_;
  int norm_x_, norm_y_, norm_w_, norm_h_;
  std::vector<Level> levels_;
};

bool eval_window(const Cascade& cascade, const IntegralImage& ii, int x, int y, double scale);

struct Box {
  int x = 0, y = 0, w = 0, h = 0;

  bool operator==(const Box&) const = default;
  auto operator<=>(const Box&) const = default;
};

struct Detection {
  int x = 0, y = 0, w = 0, h = 0;
  int neighbor_count = 0;

  Box box() const { return {x, y, w, h}; }
  bool operator==(const Detection&) const = default;
};

struct Size {
  int width = 0, height = 0;
};

struct DetectParams {
  double scale_factor = 1.1;
  int min_neighbors = 3;
  double group_eps = 0.2;
  std::optional<Size> min_size = Size{30, 30};
  std::optional<Size> max_size;

  void validate() const;
};

/// Boxes are equivalent when every edge moves by at most
/// eps * (min(w1, w2) + min(h1, h2)) / 2. Classes larger than min_neighbors
/// produce their rounded mean box; output is sorted by (y, x, w, h).
std::vector<Detection> group_rectangles(std::span<const Box> candidates, int min_neighbors, double eps);

/// Every window accepted by the cascade at every scale, before grouping.
std::vector<Box> scan_windows(const Cascade& cascade, const IntegralImage& ii, const DetectParams& params);

std::vector<Detection> detect_multiscale(const Cascade& cascade, const GrayImage& img, const DetectParams& params);

}  // namespace storewatch::haar
