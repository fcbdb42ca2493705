#include <doctest.h>

#include <cmath>
#include <future>

#include "models.hpp"
#include "oracles.hpp"
#include "storewatch/demographics.hpp"
#include "storewatch/error.hpp"
#include "storewatch/expression.hpp"

using namespace storewatch;

namespace {

using fixture::kWrnTrainable;
using fixture::kXceptionTrainable;

const weights::TensorArchive& wrn_weights() {
  static const auto a = weights::random_archive(demographics::wrn_manifest(), 42);
  return a;
}

const weights::TensorArchive& xc_weights() {
  static const auto a = weights::random_archive(expression::xception_manifest(), 43);
  return a;
}

const demographics::AgeGenderNet& wrn() {
  static const auto net = demographics::AgeGenderNet::build({}, wrn_weights());
  return net;
}

double sum(std::span<const float> v) {
  double s = 0;
  for (auto x : v) s += x;
  return s;
}

}  // namespace

TEST_CASE("age_group bins") {
  using demographics::AgeGroup;
  CHECK(demographics::age_group(0) == AgeGroup::g0_9);
  CHECK(demographics::age_group(9.999) == AgeGroup::g0_9);
  CHECK(demographics::age_group(10) == AgeGroup::g10_19);
  CHECK(demographics::age_group(34.6) == AgeGroup::g30_39);
  CHECK(demographics::age_group(93) == AgeGroup::g70_79);
  CHECK(demographics::to_string(demographics::age_group(34.6)) == "30-39");
  CHECK_THROWS_AS(demographics::age_group(-0.1), DomainError);
  CHECK_THROWS_AS(demographics::age_group(NAN), DomainError);
  CHECK(demographics::parse_age_group("70-79") == AgeGroup::g70_79);
  CHECK_FALSE(demographics::parse_age_group("80-89"));
  CHECK(demographics::parse_gender("male") == demographics::Gender::male);
}

TEST_CASE("wrn config validation") {
  demographics::WrnConfig c;
  CHECK_NOTHROW(c.validate());
  c.depth = 15;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = {};
  c.input_side = 32;
  CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("wrn structure, shapes and parameter count") {
  const auto& net = wrn();
  CHECK(net.network().trainable_parameter_count() == kWrnTrainable);
  CHECK(net.network().count(nn::LayerKind::dense) == 2);
  CHECK(net.network().count(nn::LayerKind::softmax) == 2);
  // conv0 + 2 convs per block * 6 blocks + 2 projection shortcuts (group 1
  // changes width 16 -> 128, groups 2 and 3 change stride and width).
  CHECK(net.network().count(nn::LayerKind::conv2d) == 1 + 12 + 3);

  std::mt19937 rng(1);
  const auto face = oracle::random_tensor(rng, {64, 64, 3}, 0.f, 255.f);
  const auto out = net.forward(face);
  REQUIRE(out.size() == 2);
  CHECK(out[0].dims() == Shape{2});
  CHECK(out[1].dims() == Shape{101});
  CHECK(std::abs(sum(out[0].data()) - 1.0) <= 1e-5);
  CHECK(std::abs(sum(out[1].data()) - 1.0) <= 1e-5);

  const auto r = net.predict(face);
  CHECK(r.age_estimate >= 0.0);
  CHECK(r.age_estimate <= 100.0);
  CHECK(r.group == demographics::age_group(r.age_estimate));
  CHECK(static_cast<int>(r.gender) == (r.gender_probs[1] > r.gender_probs[0] ? 1 : 0));

  CHECK_THROWS_AS(net.predict(Tensor({32, 32, 3})), ShapeError);
  CHECK_THROWS_AS(net.predict(Tensor({64, 64, 1})), ShapeError);
}

TEST_CASE("wrn forward is deterministic across threads") {
  const auto& net = wrn();
  std::mt19937 rng(2);
  const auto face = oracle::random_tensor(rng, {64, 64, 3}, 0.f, 255.f);
  const auto ref = net.forward(face);
  auto a = std::async(std::launch::async, [&] { return net.forward(face); });
  auto b = std::async(std::launch::async, [&] { return net.forward(face); });
  CHECK(a.get() == ref);
  CHECK(b.get() == ref);
}

TEST_CASE("wrn missing and mis-shaped weights are named") {
  auto missing = wrn_weights();
  missing.entries.erase("wrn.g2.b1.bn2.variance");
  try {
    demographics::AgeGenderNet::build({}, missing);
    FAIL("expected MissingWeightError");
  } catch (const MissingWeightError& e) {
    CHECK(e.name() == "wrn.g2.b1.bn2.variance");
  }
  auto wrong = wrn_weights();
  wrong.entries.insert_or_assign("wrn.head.age.bias", Tensor({100}));
  CHECK_THROWS_WITH_AS(demographics::AgeGenderNet::build({}, wrong), doctest::Contains("wrn.head.age.bias"),
                       ShapeError);
}

TEST_CASE("wrn head weights force the age distribution") {
  auto a = wrn_weights();
  a.entries.insert_or_assign("wrn.head.age.kernel", Tensor({512, 101}, 0.f));
  Tensor bias({101}, 0.f);
  a.entries.insert_or_assign("wrn.head.age.bias", bias);
  const auto uniform = demographics::AgeGenderNet::build({}, a);
  const Tensor face({64, 64, 3}, 128.f);
  CHECK(uniform.predict(face).age_estimate == doctest::Approx(50.0).epsilon(1e-6));

  bias[30] = 100.f;
  a.entries.insert_or_assign("wrn.head.age.bias", bias);
  const auto onehot = demographics::AgeGenderNet::build({}, a);
  const auto r = onehot.predict(face);
  CHECK(r.age_estimate == doctest::Approx(30.0).epsilon(1e-6));
  CHECK(demographics::to_string(r.group) == "30-39");
}

TEST_CASE("decode rules") {
  const auto r = demographics::decode(Tensor({2}, {0.5f, 0.5f}), Tensor({101}, 1.f / 101));
  CHECK(r.gender == demographics::Gender::female);
  CHECK(r.age_estimate == doctest::Approx(50.0));
  Tensor ages({101}, 0.f);
  ages[100] = 1.f;
  const auto old = demographics::decode(Tensor({2}, {0.1f, 0.9f}), ages);
  CHECK(old.gender == demographics::Gender::male);
  CHECK(old.age_estimate == 100.0);
  CHECK(old.group == demographics::AgeGroup::g70_79);
  CHECK_THROWS_AS(demographics::decode(Tensor({3}), ages), ShapeError);
}

TEST_CASE("gender label is invariant to a shared logit shift") {
  std::mt19937 rng(8);
  for (int i = 0; i < 100; ++i) {
    auto logits = oracle::random_tensor(rng, {2}, -5.f, 5.f);
    const auto base = demographics::decode(ops::softmax(logits), Tensor({101}, 1.f / 101)).gender;
    const float shift = std::uniform_real_distribution<float>(-50.f, 50.f)(rng);
    for (auto& v : logits.data()) v += shift;
    CHECK(demographics::decode(ops::softmax(logits), Tensor({101}, 1.f / 101)).gender == base);
  }
}

TEST_CASE("age estimate stays in range for arbitrary distributions") {
  std::mt19937 rng(10);
  for (int i = 0; i < 200; ++i) {
    const auto p = ops::softmax(oracle::random_tensor(rng, {101}, -30.f, 30.f));
    const auto r = demographics::decode(Tensor({2}, {0.3f, 0.7f}), p);
    CHECK(r.age_estimate >= 0.0);
    CHECK(r.age_estimate <= 100.0);
  }
}

TEST_CASE("mini-xception structure, shapes and parameter count") {
  const auto net = expression::ExpressionNet::build({}, xc_weights());
  CHECK(net.network().count(nn::LayerKind::dense) == 0);
  CHECK(net.network().trainable_parameter_count() == kXceptionTrainable);
  CHECK(net.network().count(nn::LayerKind::add) == 4);
  CHECK(net.network().count(nn::LayerKind::max_pool) == 4);

  std::mt19937 rng(3);
  for (int i = 0; i < 5; ++i) {
    const auto face = oracle::random_tensor(rng, {64, 64, 1});
    const auto p = net.forward(face);
    CHECK(p.dims() == Shape{7});
    CHECK(std::abs(sum(p.data()) - 1.0) <= 1e-5);
    const auto r = net.predict(face);
    CHECK(static_cast<std::size_t>(r.label) < expression::kExpressionCount);
    CHECK(net.forward(face) == p);
  }
  CHECK_THROWS_AS(net.predict(Tensor({64, 64, 3})), ShapeError);
}

TEST_CASE("mini-xception uniform logits tie-break to angry") {
  auto a = xc_weights();
  a.entries.insert_or_assign("xc.conv_out.kernel", Tensor({3, 3, 128, 7}, 0.f));
  a.entries.insert_or_assign("xc.conv_out.bias", Tensor({7}, 0.f));
  const auto net = expression::ExpressionNet::build({}, a);
  const auto r = net.predict(Tensor({64, 64, 1}, 0.3f));
  for (auto p : r.probs) CHECK(p == doctest::Approx(1.0 / 7).epsilon(1e-6));
  CHECK(r.label == expression::Expression::angry);

  // Crafted equal maxima at indices 3 and 5: the lower index wins.
  const auto tie = expression::decode(Tensor({7}, {0.1f, 0.1f, 0.1f, 0.25f, 0.1f, 0.25f, 0.1f}));
  CHECK(tie.label == expression::Expression::happy);
}

TEST_CASE("mini-xception missing weight is named") {
  auto a = xc_weights();
  a.entries.erase("xc.b3.sep2.pointwise");
  CHECK_THROWS_WITH_AS(expression::ExpressionNet::build({}, a), doctest::Contains("xc.b3.sep2.pointwise"),
                       MissingWeightError);
}

TEST_CASE("expression labels") {
  CHECK(expression::to_string(expression::Expression::neutral) == "neutral");
  CHECK(expression::parse_expression("anger") == expression::Expression::angry);
  CHECK(expression::parse_expression("angry") == expression::Expression::angry);
  CHECK_FALSE(expression::parse_expression("contempt"));
  for (std::size_t i = 0; i < expression::kExpressionCount; ++i) {
    const auto e = static_cast<expression::Expression>(i);
    CHECK(expression::parse_expression(expression::to_string(e)) == e);
  }
}

TEST_CASE("preprocess_face") {
  // Full-frame box without margin is a no-op resample.
  std::mt19937 rng(4);
  RgbImage frame(64, 64);
  for (auto& p : frame.pixels) p = static_cast<std::uint8_t>(rng() & 0xFF);
  const auto same = demographics::preprocess_face(frame, {0, 0, 64, 64}, 0.0);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) CHECK(same.at(y, x, c) == frame.pixel(x, y)[c]);

  const RgbImage flat(200, 150, 77);
  const auto constant = demographics::preprocess_face(flat, {50, 40, 37, 37}, 0.4);
  for (auto v : constant.values()) CHECK(v == 77.f);

  CHECK_THROWS_AS(demographics::preprocess_face(flat, {300, 10, 20, 20}, 0.0), GeometryError);
  CHECK_THROWS_AS(demographics::preprocess_face(flat, {10, 10, 20, 20}, -0.5), DomainError);
}

TEST_CASE("preprocess_face matches the bilinear formula on a gradient") {
  // Pixels sample linear ramps, so bilinear interpolation reproduces the ramp
  // at the source coordinate up to the 0.5 rounding of the stored pixels.
  RgbImage frame(128, 128);
  const auto ramp = [](double x, double y, int c) {
    return c == 0 ? x * 255.0 / 127.0 : c == 1 ? y * 255.0 / 127.0 : (x + y) * 255.0 / 254.0;
  };
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x)
      for (int c = 0; c < 3; ++c) frame.pixel(x, y)[c] = static_cast<std::uint8_t>(std::lround(ramp(x, y, c)));
  const haar::Box box{44, 44, 40, 40};
  const auto t = demographics::preprocess_face(frame, box, 0.4);
  // margin 0.4 * 40 = 16 on each side: region [28, 100).
  const double x0 = 28, extent = 72;
  double worst = 0;
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) {
      const double sy = x0 + std::clamp((i + 0.5) * extent / 64 - 0.5, 0.0, extent - 1);
      const double sx = x0 + std::clamp((j + 0.5) * extent / 64 - 0.5, 0.0, extent - 1);
      for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(t.at(i, j, c) - ramp(sx, sy, c)));
    }
  CHECK(worst <= 0.5);
}

TEST_CASE("preprocess_gray") {
  const RgbImage black(80, 80, 0), white(80, 80, 255);
  const auto lo = expression::preprocess_gray(black, {5, 5, 50, 50});
  const auto hi = expression::preprocess_gray(white, {5, 5, 50, 50});
  for (auto v : lo.values()) CHECK(v == -1.f);
  for (auto v : hi.values()) CHECK(v == 1.f);

  // Composed oracle: luma of each ramp pixel, bilinear at the source
  // coordinate, then the affine map.
  RgbImage frame(100, 100);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x) {
      auto* p = frame.pixel(x, y);
      p[0] = static_cast<std::uint8_t>(2 * x);
      p[1] = static_cast<std::uint8_t>(2 * y);
      p[2] = static_cast<std::uint8_t>(x + y);
    }
  const haar::Box box{10, 20, 70, 70};
  const auto t = expression::preprocess_gray(frame, box);
  const auto luma_at = [](double x, double y) { return 0.299 * 2 * x + 0.587 * 2 * y + 0.114 * (x + y); };
  double worst = 0;
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) {
      const double sy = 20 + std::clamp((i + 0.5) * 70 / 64 - 0.5, 0.0, 69.0);
      const double sx = 10 + std::clamp((j + 0.5) * 70 / 64 - 0.5, 0.0, 69.0);
      worst = std::max(worst, std::abs(t.at(i, j, 0) - (luma_at(sx, sy) / 127.5 - 1.0)));
    }
  CHECK(worst <= 0.01);
}

TEST_CASE("luma rounding") {
  CHECK(luma(255, 255, 255) == 255);
  CHECK(luma(0, 0, 0) == 0);
  CHECK(luma(255, 0, 0) == 76);   // 76.245
  CHECK(luma(0, 255, 0) == 150);  // 149.685
  CHECK(luma(0, 0, 255) == 29);   // 29.07
  CHECK(luma(1, 1, 1) == 1);
}
