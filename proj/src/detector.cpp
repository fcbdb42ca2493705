#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "storewatch/error.hpp"
#include "storewatch/haar.hpp"

namespace storewatch::haar {

namespace {

int round_scaled(int v, double scale) { return static_cast<int>(std::lround(v * scale)); }

}  // namespace

ScaledCascade::ScaledCascade(const Cascade& cascade, double scale) : scale_(scale) {
  if (!(scale > 0.0)) throw DomainError("cascade scale must be positive");
  window_w_ = round_scaled(cascade.window_width, scale);
  window_h_ = round_scaled(cascade.window_height, scale);
  // Variance is normalised over the window inset by one base pixel.
  norm_x_ = norm_y_ = std::max(1, static_cast<int>(std::lround(scale)));
  norm_w_ = round_scaled(cascade.window_width - 2, scale);
  norm_h_ = round_scaled(cascade.window_height - 2, scale);
  extent_w_ = std::max(window_w_, norm_x_ + norm_w_);
  extent_h_ = std::max(window_h_, norm_y_ + norm_h_);

  levels_.reserve(cascade.stages.size());
  for (const auto& stage : cascade.stages) {
    Level level{{}, stage.stage_threshold};
    level.nodes.reserve(stage.weak_classifiers.size());
    for (const auto& weak : stage.weak_classifiers) {
      Node node{{}, weak.threshold, weak.left_value, weak.right_value};
      std::size_t negative = 0;
      for (std::size_t k = 0; k < weak.rects.size(); ++k) {
        const auto& r = weak.rects[k];
        Rect scaled{round_scaled(r.x, scale), round_scaled(r.y, scale), std::max(1, round_scaled(r.w, scale)),
                    std::max(1, round_scaled(r.h, scale)), r.weight};
        extent_w_ = std::max(extent_w_, scaled.x + scaled.w);
        extent_h_ = std::max(extent_h_, scaled.y + scaled.h);
        if (r.weight < 0) negative = k;
        node.rects.push_back(scaled);
      }
      // Rounding breaks the zero weighted-area balance; the negative rect absorbs it.
      if (node.rects.size() > 1) {
        double positive_area = 0.0;
        for (std::size_t k = 0; k < node.rects.size(); ++k) {
          if (k == negative) continue;
          positive_area += node.rects[k].weight * node.rects[k].w * node.rects[k].h;
        }
        const auto& neg = node.rects[negative];
        node.rects[negative].weight = -positive_area / (static_cast<double>(neg.w) * neg.h);
      }
      level.nodes.push_back(std::move(node));
    }
    levels_.push_back(std::move(level));
  }
}

bool ScaledCascade::evaluate(const IntegralImage& ii, int x, int y) const {
  if (x < 0 || y < 0 || x > ii.width() - extent_w_ || y > ii.height() - extent_h_) {
    throw BoundsError("window at (" + std::to_string(x) + ", " + std::to_string(y) + ") with extent " +
                      std::to_string(extent_w_) + "x" + std::to_string(extent_h_) + " leaves the " +
                      std::to_string(ii.width()) + "x" + std::to_string(ii.height()) + " image");
  }
  const auto box_sum = [&](int rx, int ry, int rw, int rh) {
    return ii.sum(ry + rh, rx + rw) - ii.sum(ry, rx + rw) - ii.sum(ry + rh, rx) + ii.sum(ry, rx);
  };
  const auto box_sq_sum = [&](int rx, int ry, int rw, int rh) {
    return ii.sq_sum(ry + rh, rx + rw) - ii.sq_sum(ry, rx + rw) - ii.sq_sum(ry + rh, rx) + ii.sq_sum(ry, rx);
  };

  const std::int64_t area = static_cast<std::int64_t>(norm_w_) * norm_h_;
  const std::int64_t s1 = box_sum(x + norm_x_, y + norm_y_, norm_w_, norm_h_);
  const std::int64_t s2 = box_sq_sum(x + norm_x_, y + norm_y_, norm_w_, norm_h_);
  // area^2 * variance, exact in integers so a flat window is detected exactly.
  const std::int64_t spread = area * s2 - s1 * s1;
  const double std_dev = spread > 0 ? std::sqrt(static_cast<double>(spread)) / static_cast<double>(area) : 1.0;
  const double threshold_scale = std_dev * static_cast<double>(area);

  for (const auto& level : levels_) {
    double stage_sum = 0.0;
    for (const auto& node : level.nodes) {
      double feature = 0.0;
      for (const auto& r : node.rects) {
        feature += r.weight * static_cast<double>(box_sum(x + r.x, y + r.y, r.w, r.h));
      }
      stage_sum += feature < node.threshold * threshold_scale ? node.left : node.right;
    }
    if (stage_sum < level.threshold) return false;
  }
  return true;
}

bool eval_window(const Cascade& cascade, const IntegralImage& ii, int x, int y, double scale) {
  return ScaledCascade(cascade, scale).evaluate(ii, x, y);
}

void DetectParams::validate() const {
  if (!(scale_factor > 1.0)) throw DomainError("scale factor must be > 1");
  if (min_neighbors < 0) throw DomainError("min_neighbors must be >= 0");
  if (!(group_eps >= 0.0)) throw DomainError("grouping eps must be >= 0");
  if (min_size && max_size && (min_size->width > max_size->width || min_size->height > max_size->height)) {
    throw DomainError("min_size exceeds max_size");
  }
}

std::vector<Detection> group_rectangles(std::span<const Box> candidates, int min_neighbors, double eps) {
  if (!(eps >= 0.0)) throw DomainError("grouping eps must be >= 0");
  const std::size_t n = candidates.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  const auto find = [&](std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  const auto similar = [eps](const Box& a, const Box& b) {
    const double delta = eps * (std::min(a.w, b.w) + std::min(a.h, b.h)) * 0.5;
    return std::abs(a.x - b.x) <= delta && std::abs(a.y - b.y) <= delta &&
           std::abs(a.x + a.w - b.x - b.w) <= delta && std::abs(a.y + a.h - b.y - b.h) <= delta;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (similar(candidates[i], candidates[j])) {
        const auto ri = find(i), rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }

  struct Accum {
    std::int64_t x = 0, y = 0, w = 0, h = 0;
    int count = 0;
  };
  std::vector<Accum> classes(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& acc = classes[find(i)];
    acc.x += candidates[i].x;
    acc.y += candidates[i].y;
    acc.w += candidates[i].w;
    acc.h += candidates[i].h;
    ++acc.count;
  }
  const auto mean = [](std::int64_t total, int count) {
    return static_cast<int>(std::llround(static_cast<double>(total) / count));
  };
  std::vector<Detection> out;
  for (const auto& acc : classes) {
    if (acc.count == 0 || acc.count <= min_neighbors) continue;
    out.push_back({mean(acc.x, acc.count), mean(acc.y, acc.count), mean(acc.w, acc.count), mean(acc.h, acc.count),
                   acc.count});
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    return std::tie(a.y, a.x, a.w, a.h, a.neighbor_count) < std::tie(b.y, b.x, b.w, b.h, b.neighbor_count);
  });
  return out;
}

std::vector<Box> scan_windows(const Cascade& cascade, const IntegralImage& ii, const DetectParams& params) {
  params.validate();
  std::vector<Box> hits;
  for (int k = 0;; ++k) {
    const double scale = std::pow(params.scale_factor, k);
    const ScaledCascade scaled(cascade, scale);
    const int win_w = scaled.window_width(), win_h = scaled.window_height();
    if (scaled.extent_width() > ii.width() || scaled.extent_height() > ii.height()) break;
    if (params.max_size && (win_w > params.max_size->width || win_h > params.max_size->height)) break;
    if (params.min_size && (win_w < params.min_size->width || win_h < params.min_size->height)) continue;

    const int step = std::max(1, static_cast<int>(std::lround(scale)));
    for (int y = 0; y + scaled.extent_height() <= ii.height(); y += step) {
      for (int x = 0; x + scaled.extent_width() <= ii.width(); x += step) {
        if (scaled.evaluate(ii, x, y)) hits.push_back({x, y, win_w, win_h});
      }
    }
  }
  return hits;
}

std::vector<Detection> detect_multiscale(const Cascade& cascade, const GrayImage& img, const DetectParams& params) {
  const IntegralImage ii(img);
  const auto hits = scan_windows(cascade, ii, params);
  return group_rectangles(hits, params.min_neighbors, params.group_eps);
}

}  // namespace storewatch::haar
