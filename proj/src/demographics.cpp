#include "storewatch/demographics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "storewatch/error.hpp"

namespace storewatch::demographics {

namespace {

constexpr std::array<std::string_view, kAgeGroupCount> kAgeGroupLabels = {
    "0-9", "10-19", "20-29", "30-39", "40-49", "50-59", "60-69", "70-79"};

struct BlockShape {
  std::string prefix;
  std::size_t in, out, stride;
  bool projection() const { return in != out || stride != 1; }
};

std::vector<BlockShape> block_shapes(const WrnConfig& c) {
  std::vector<BlockShape> out;
  std::size_t in = 16;
  const std::size_t strides[3] = {1, 2, 2};
  for (std::size_t g = 0; g < 3; ++g) {
    const std::size_t width = (16u << g) * c.widen_factor;
    for (std::size_t b = 0; b < c.blocks_per_group(); ++b) {
      out.push_back({"wrn.g" + std::to_string(g + 1) + ".b" + std::to_string(b + 1), in, width, b == 0 ? strides[g] : 1});
      in = width;
    }
  }
  return out;
}

}  // namespace

void WrnConfig::validate() const {
  if (depth < 10 || (depth - 4) % 6 != 0) throw DomainError("WRN depth must satisfy (depth - 4) % 6 == 0, got " + std::to_string(depth));
  if (widen_factor == 0) throw DomainError("WRN widen factor must be positive");
  if (input_side != 64) throw DomainError("WRN input side must be 64, got " + std::to_string(input_side));
  if (age_bins == 0 || gender_classes != 2) throw DomainError("WRN heads need age_bins > 0 and 2 gender classes");
}

std::string_view to_string(Gender g) noexcept { return g == Gender::male ? "male" : "female"; }

std::optional<Gender> parse_gender(std::string_view text) noexcept {
  if (text == "female" || text == "f" || text == "F") return Gender::female;
  if (text == "male" || text == "m" || text == "M") return Gender::male;
  return std::nullopt;
}

std::string_view to_string(AgeGroup g) noexcept { return kAgeGroupLabels[static_cast<std::size_t>(g)]; }

std::optional<AgeGroup> parse_age_group(std::string_view text) noexcept {
  for (std::size_t i = 0; i < kAgeGroupLabels.size(); ++i) {
    if (kAgeGroupLabels[i] == text) return static_cast<AgeGroup>(i);
  }
  return std::nullopt;
}

AgeGroup age_group(double age) {
  if (!std::isfinite(age) || age < 0.0) throw DomainError("age must be a non-negative number, got " + std::to_string(age));
  const auto decade = static_cast<std::size_t>(std::floor(age / 10.0));
  return static_cast<AgeGroup>(std::min(decade, kAgeGroupCount - 1));
}

weights::Manifest wrn_manifest(const WrnConfig& config) {
  config.validate();
  weights::Manifest m;
  m.push_back({"wrn.conv0.kernel", {3, 3, 3, 16}});
  for (const auto& b : block_shapes(config)) {
    nn::append_batch_norm_manifest(m, b.prefix + ".bn1", b.in);
    m.push_back({b.prefix + ".conv1.kernel", {3, 3, b.in, b.out}});
    nn::append_batch_norm_manifest(m, b.prefix + ".bn2", b.out);
    m.push_back({b.prefix + ".conv2.kernel", {3, 3, b.out, b.out}});
    if (b.projection()) m.push_back({b.prefix + ".shortcut.kernel", {1, 1, b.in, b.out}});
  }
  const std::size_t final_width = 64 * config.widen_factor;
  nn::append_batch_norm_manifest(m, "wrn.bn_final", final_width);
  m.push_back({"wrn.head.gender.kernel", {final_width, config.gender_classes}});
  m.push_back({"wrn.head.gender.bias", {config.gender_classes}});
  m.push_back({"wrn.head.age.kernel", {final_width, config.age_bins}});
  m.push_back({"wrn.head.age.bias", {config.age_bins}});
  return m;
}

AgeGenderNet AgeGenderNet::build(const WrnConfig& config, const weights::TensorArchive& archive) {
  config.validate();
  using ops::Padding;
  AgeGenderNet result;
  result.config_ = config;
  nn::Network& net = result.net_;
  const float eps = kBatchNormEpsilon;

  auto x = net.conv2d(nn::Network::kInput, "wrn.conv0", nn::take_weight(archive, "wrn.conv0.kernel", {3, 3, 3, 16}),
                      std::nullopt, {1, Padding::same, 1});
  for (const auto& b : block_shapes(config)) {
    // Pre-activation block: BN -> ReLU -> conv, twice, plus the shortcut.
    auto act = net.relu(net.batch_norm(x, b.prefix + ".bn1", nn::take_batch_norm(archive, b.prefix + ".bn1", b.in, eps)));
    auto shortcut = x;
    if (b.projection()) {
      shortcut = net.conv2d(act, b.prefix + ".shortcut",
                            nn::take_weight(archive, b.prefix + ".shortcut.kernel", {1, 1, b.in, b.out}), std::nullopt,
                            {b.stride, Padding::same, 1});
    }
    auto y = net.conv2d(act, b.prefix + ".conv1", nn::take_weight(archive, b.prefix + ".conv1.kernel", {3, 3, b.in, b.out}),
                        std::nullopt, {b.stride, Padding::same, 1});
    y = net.relu(net.batch_norm(y, b.prefix + ".bn2", nn::take_batch_norm(archive, b.prefix + ".bn2", b.out, eps)));
    y = net.conv2d(y, b.prefix + ".conv2", nn::take_weight(archive, b.prefix + ".conv2.kernel", {3, 3, b.out, b.out}),
                   std::nullopt, {1, Padding::same, 1});
    x = net.add(y, shortcut);
  }
  const std::size_t width = 64 * config.widen_factor;
  x = net.relu(net.batch_norm(x, "wrn.bn_final", nn::take_batch_norm(archive, "wrn.bn_final", width, eps)));
  const auto pooled = net.global_avg_pool(x);
  const auto gender = net.dense(pooled, "wrn.head.gender",
                                nn::take_weight(archive, "wrn.head.gender.kernel", {width, config.gender_classes}),
                                nn::take_weight(archive, "wrn.head.gender.bias", {config.gender_classes}));
  const auto age = net.dense(pooled, "wrn.head.age", nn::take_weight(archive, "wrn.head.age.kernel", {width, config.age_bins}),
                             nn::take_weight(archive, "wrn.head.age.bias", {config.age_bins}));
  net.mark_output(net.softmax(gender));
  net.mark_output(net.softmax(age));
  return result;
}

std::vector<Tensor> AgeGenderNet::forward(const Tensor& face) const {
  const Shape expected{config_.input_side, config_.input_side, 3};
  if (face.dims() != expected) {
    throw ShapeError("age/gender input must be " + shape_to_string(expected) + ", got " + shape_to_string(face.dims()));
  }
  return net_.forward(face);
}

AgeGenderResult AgeGenderNet::predict(const Tensor& face) const {
  const auto outputs = forward(face);
  return decode(outputs[0], outputs[1]);
}

AgeGenderResult decode(const Tensor& gender_probs, const Tensor& age_probs) {
  if (gender_probs.size() != 2) throw ShapeError("gender head must have 2 outputs, got " + shape_to_string(gender_probs.dims()));
  if (age_probs.empty()) throw ShapeError("age head is empty");
  AgeGenderResult r;
  r.gender_probs = {gender_probs[0], gender_probs[1]};
  // Ties resolve to the lower index.
  r.gender = gender_probs[1] > gender_probs[0] ? Gender::male : Gender::female;
  r.age_probs.assign(age_probs.data().begin(), age_probs.data().end());
  double expectation = 0.0;
  for (std::size_t i = 0; i < r.age_probs.size(); ++i) expectation += static_cast<double>(i) * r.age_probs[i];
  r.age_estimate = std::clamp(expectation, 0.0, static_cast<double>(r.age_probs.size() - 1));
  r.group = age_group(r.age_estimate);
  return r;
}

Tensor preprocess_face(const RgbImage& frame, const haar::Box& box, double margin, std::size_t side) {
  return resize_rgb(frame, expand_box(box, margin, frame.width, frame.height), side);
}

}  // namespace storewatch::demographics
