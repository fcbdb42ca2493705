#include "storewatch/expression.hpp"

#include <string>

#include "storewatch/error.hpp"

namespace storewatch::expression {

namespace {

constexpr std::array<std::string_view, kExpressionCount> kLabels = {"angry", "disgust", "fear",   "happy",
                                                                    "sad",   "surprise", "neutral"};
constexpr float kEpsilon = 1e-3f;

}  // namespace

void XceptionConfig::validate() const {
  if (blocks != block_filters.size()) {
    throw DomainError("mini-Xception has " + std::to_string(blocks) + " blocks but " +
                      std::to_string(block_filters.size()) + " filter counts");
  }
  if (input_side < 8 || stem_filters == 0 || classes == 0) throw DomainError("invalid mini-Xception configuration");
}

std::string_view to_string(Expression e) noexcept { return kLabels[static_cast<std::size_t>(e)]; }

std::optional<Expression> parse_expression(std::string_view text) noexcept {
  if (text == "anger") return Expression::angry;
  for (std::size_t i = 0; i < kLabels.size(); ++i) {
    if (kLabels[i] == text) return static_cast<Expression>(i);
  }
  return std::nullopt;
}

weights::Manifest xception_manifest(const XceptionConfig& config) {
  config.validate();
  weights::Manifest m;
  const std::size_t s = config.stem_filters;
  m.push_back({"xc.stem1.kernel", {3, 3, 1, s}});
  nn::append_batch_norm_manifest(m, "xc.stem1.bn", s);
  m.push_back({"xc.stem2.kernel", {3, 3, s, s}});
  nn::append_batch_norm_manifest(m, "xc.stem2.bn", s);
  std::size_t in = s;
  for (std::size_t b = 0; b < config.blocks; ++b) {
    const std::string p = "xc.b" + std::to_string(b + 1);
    const std::size_t f = config.block_filters[b];
    m.push_back({p + ".shortcut.kernel", {1, 1, in, f}});
    nn::append_batch_norm_manifest(m, p + ".shortcut.bn", f);
    m.push_back({p + ".sep1.depthwise", {3, 3, 1, in}});
    m.push_back({p + ".sep1.pointwise", {1, 1, in, f}});
    nn::append_batch_norm_manifest(m, p + ".sep1.bn", f);
    m.push_back({p + ".sep2.depthwise", {3, 3, 1, f}});
    m.push_back({p + ".sep2.pointwise", {1, 1, f, f}});
    nn::append_batch_norm_manifest(m, p + ".sep2.bn", f);
    in = f;
  }
  m.push_back({"xc.conv_out.kernel", {3, 3, in, config.classes}});
  m.push_back({"xc.conv_out.bias", {config.classes}});
  return m;
}

ExpressionNet ExpressionNet::build(const XceptionConfig& config, const weights::TensorArchive& archive) {
  config.validate();
  using ops::Padding;
  ExpressionNet result;
  result.config_ = config;
  nn::Network& net = result.net_;
  const std::size_t s = config.stem_filters;

  auto x = net.conv2d(nn::Network::kInput, "xc.stem1", nn::take_weight(archive, "xc.stem1.kernel", {3, 3, 1, s}),
                      std::nullopt, {1, Padding::valid, 1});
  x = net.relu(net.batch_norm(x, "xc.stem1.bn", nn::take_batch_norm(archive, "xc.stem1.bn", s, kEpsilon)));
  x = net.conv2d(x, "xc.stem2", nn::take_weight(archive, "xc.stem2.kernel", {3, 3, s, s}), std::nullopt,
                 {1, Padding::valid, 1});
  x = net.relu(net.batch_norm(x, "xc.stem2.bn", nn::take_batch_norm(archive, "xc.stem2.bn", s, kEpsilon)));

  std::size_t in = s;
  for (std::size_t b = 0; b < config.blocks; ++b) {
    const std::string p = "xc.b" + std::to_string(b + 1);
    const std::size_t f = config.block_filters[b];
    auto residual = net.conv2d(x, p + ".shortcut", nn::take_weight(archive, p + ".shortcut.kernel", {1, 1, in, f}),
                               std::nullopt, {2, Padding::same, 1});
    residual = net.batch_norm(residual, p + ".shortcut.bn", nn::take_batch_norm(archive, p + ".shortcut.bn", f, kEpsilon));

    // Separable convolution = depthwise 3x3 (groups == channels) + pointwise 1x1.
    auto y = net.conv2d(x, p + ".sep1.depthwise", nn::take_weight(archive, p + ".sep1.depthwise", {3, 3, 1, in}),
                        std::nullopt, {1, Padding::same, in});
    y = net.conv2d(y, p + ".sep1.pointwise", nn::take_weight(archive, p + ".sep1.pointwise", {1, 1, in, f}),
                   std::nullopt, {1, Padding::same, 1});
    y = net.relu(net.batch_norm(y, p + ".sep1.bn", nn::take_batch_norm(archive, p + ".sep1.bn", f, kEpsilon)));
    y = net.conv2d(y, p + ".sep2.depthwise", nn::take_weight(archive, p + ".sep2.depthwise", {3, 3, 1, f}),
                   std::nullopt, {1, Padding::same, f});
    y = net.conv2d(y, p + ".sep2.pointwise", nn::take_weight(archive, p + ".sep2.pointwise", {1, 1, f, f}),
                   std::nullopt, {1, Padding::same, 1});
    y = net.batch_norm(y, p + ".sep2.bn", nn::take_batch_norm(archive, p + ".sep2.bn", f, kEpsilon));
    y = net.max_pool(y, 3, 2, Padding::same);
    x = net.add(y, residual);
    in = f;
  }
  x = net.conv2d(x, "xc.conv_out", nn::take_weight(archive, "xc.conv_out.kernel", {3, 3, in, config.classes}),
                 nn::take_weight(archive, "xc.conv_out.bias", {config.classes}), {1, Padding::same, 1});
  net.mark_output(net.softmax(net.global_avg_pool(x)));
  return result;
}

Tensor ExpressionNet::forward(const Tensor& face) const {
  const Shape expected{config_.input_side, config_.input_side, 1};
  if (face.dims() != expected) {
    throw ShapeError("expression input must be " + shape_to_string(expected) + ", got " + shape_to_string(face.dims()));
  }
  return net_.forward(face).front();
}

ExpressionResult ExpressionNet::predict(const Tensor& face) const { return decode(forward(face)); }

ExpressionResult decode(const Tensor& probs) {
  if (probs.size() != kExpressionCount) {
    throw ShapeError("expression head must have 7 outputs, got " + shape_to_string(probs.dims()));
  }
  ExpressionResult r;
  std::size_t best = 0;
  for (std::size_t i = 0; i < kExpressionCount; ++i) {
    r.probs[i] = probs[i];
    if (probs[i] > probs[best]) best = i;
  }
  r.label = static_cast<Expression>(best);
  return r;
}

Tensor preprocess_gray(const RgbImage& frame, const haar::Box& box, std::size_t side) {
  Tensor t = resize_gray(frame, expand_box(box, 0.0, frame.width, frame.height), side);
  for (float& v : t.data()) v = v / 127.5f - 1.0f;
  return t;
}

}  // namespace storewatch::expression
