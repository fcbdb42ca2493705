#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "storewatch/error.hpp"

using namespace storewatch;
using namespace storewatch::haar;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DetectParams exact_scale() {
  DetectParams p;
  p.min_neighbors = 0;
  p.min_size = Size{24, 24};
  p.max_size = Size{24, 24};
  return p;
}

const char* kMinimal = R"(<?xml version="1.0"?>
<opencv_storage>
<tiny type_id="opencv-haar-classifier">
  <size>4 6</size>
  <stages>
    <_>
      <trees>
        <_><_>
          <feature><rects><_>0 0 4 6 1.</_></rects><tilted>0</tilted></feature>
          <threshold>0.25</threshold>
          <left_val>-0.5</left_val>
          <right_val>0.75</right_val>
        </_></_>
      </trees>
      <stage_threshold>-1.5</stage_threshold>
    </_>
  </stages>
</tiny>
</opencv_storage>
)";

}  // namespace

TEST_CASE("minimal handwritten cascade echoes its values") {
  const auto c = parse_cascade_xml(kMinimal);
  CHECK(c.window_width == 4);
  CHECK(c.window_height == 6);
  REQUIRE(c.stages.size() == 1);
  CHECK(c.stages[0].stage_threshold == -1.5);
  REQUIRE(c.stages[0].weak_classifiers.size() == 1);
  const auto& w = c.stages[0].weak_classifiers[0];
  CHECK(w.threshold == 0.25);
  CHECK(w.left_value == -0.5);
  CHECK(w.right_value == 0.75);
  CHECK(w.rects == std::vector<WeightedRect>{{0, 0, 4, 6, 1.0}});
}

TEST_CASE("frontal-face cascade matches the XML-count oracle in both schemas") {
  // tests/oracles/cascade_counts.py: 24 24 25 2913 for both files.
  for (const char* name : {"haarcascade_frontalface_default.xml", "haarcascade_frontalface_legacy.xml"}) {
    CAPTURE(name);
    const auto c = load_cascade(fixture::data(name));
    CHECK(c.window_width == 24);
    CHECK(c.window_height == 24);
    CHECK(c.stages.size() == 25);
    CHECK(c.classifier_count() == 2913);
  }
  CHECK(load_cascade(fixture::data("haarcascade_frontalface_default.xml")) ==
        load_cascade(fixture::data("haarcascade_frontalface_legacy.xml")));
}

TEST_CASE("first stump of the frontal cascade is read exactly") {
  const auto c = load_cascade(fixture::data("haarcascade_frontalface_default.xml"));
  const auto& w = c.stages[0].weak_classifiers[0];
  CHECK(w.rects == std::vector<WeightedRect>{{6, 4, 12, 9, -1.0}, {6, 7, 12, 3, 3.0}});
  CHECK(w.threshold == -3.1511999666690826e-02);
  CHECK(w.left_value == 2.0875380039215088e+00);
  CHECK(w.right_value == -2.2172100543975830e+00);
}

TEST_CASE("the two-rect fixture file parses to the in-code fixture") {
  CHECK(load_cascade(fixture::data("two_rect_cascade.xml")) == fixture::two_rect_cascade());
}

TEST_CASE("parser rejections") {
  CHECK_THROWS_AS(load_cascade(fixture::data("tilted_cascade.xml")), UnsupportedFeatureError);
  CHECK_THROWS_AS(load_cascade(fixture::data("nonstump_cascade.xml")), UnsupportedFeatureError);
  CHECK_THROWS_AS(load_cascade(fixture::data("does_not_exist.xml")), IoError);
  try {
    parse_cascade_xml("<opencv_storage>\n<a>\n<size>24 24</size>\n<b x=1>\n</a></opencv_storage>\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  std::string bad_window = kMinimal;
  bad_window.replace(bad_window.find("<size>4 6"), 9, "<size>3 6");
  CHECK_THROWS_AS(parse_cascade_xml(bad_window), ParseError);
  std::string outside = kMinimal;
  outside.replace(outside.find("0 0 4 6 1."), 10, "1 0 4 6 1.");
  CHECK_THROWS_AS(parse_cascade_xml(outside), ParseError);
  std::string two_positive = kMinimal;
  two_positive.replace(two_positive.find("<_>0 0 4 6 1.</_>"), 17, "<_>0 0 2 6 1.</_><_>2 0 2 6 1.</_>");
  CHECK_THROWS_AS(parse_cascade_xml(two_positive), UnsupportedFeatureError);
  CHECK_THROWS_AS(parse_cascade_xml("<opencv_storage><x/></opencv_storage>"), ParseError);
}

TEST_CASE("integral image hand examples") {
  const IntegralImage zeros(GrayImage(4, 4, 0));
  for (auto v : zeros.sum_table()) CHECK(v == 0);
  const IntegralImage ones(GrayImage(2, 2, 1));
  CHECK(ones.sum(2, 2) == 4);
  CHECK(ones.sq_sum(2, 2) == 4);
  const IntegralImage four(GrayImage(4, 4, 1));
  CHECK(rect_sum(four, 0, 0, 4, 4) == 16);
  CHECK_THROWS_AS(rect_sum(four, 0, 0, 0, 2), BoundsError);
  CHECK_THROWS_AS(rect_sum(four, 1, 1, 4, 1), BoundsError);
  CHECK_THROWS_AS(rect_sum(four, -1, 0, 1, 1), BoundsError);
}

TEST_CASE("integral image equals the double-sum oracle") {
  std::mt19937 rng(21);
  const auto img = oracle::random_gray(rng, 16, 16);
  const auto ii = compute_integral(img);
  for (int y = 0; y <= 16; ++y)
    for (int x = 0; x <= 16; ++x) {
      CHECK(ii.sum(y, x) == oracle::integral_sum(img, y, x, false));
      CHECK(ii.sq_sum(y, x) == oracle::integral_sum(img, y, x, true));
    }
  std::uniform_int_distribution<int> pos(0, 15);
  for (int q = 0; q < 100; ++q) {
    const int x = pos(rng), y = pos(rng);
    const int w = std::uniform_int_distribution<int>(1, 16 - x)(rng);
    const int h = std::uniform_int_distribution<int>(1, 16 - y)(rng);
    CHECK(rect_sum(ii, x, y, w, h) == oracle::pixel_sum(img, x, y, w, h));
  }
}

TEST_CASE("integral tables are monotone with zero borders") {
  std::mt19937 rng(22);
  const auto ii = compute_integral(oracle::random_gray(rng, 13, 9));
  for (int x = 0; x <= 13; ++x) CHECK(ii.sum(0, x) == 0);
  for (int y = 0; y <= 9; ++y) CHECK(ii.sum(y, 0) == 0);
  for (int y = 1; y <= 9; ++y)
    for (int x = 1; x <= 13; ++x) {
      CHECK(ii.sum(y, x) >= ii.sum(y - 1, x));
      CHECK(ii.sum(y, x) >= ii.sum(y, x - 1));
    }
}

TEST_CASE("eval_window on the hand-built fixture") {
  const auto cascade = fixture::two_rect_cascade();
  const IntegralImage flat(GrayImage(24, 24, 90));
  CHECK_FALSE(eval_window(cascade, flat, 0, 0, 1.0));

  GrayImage split(24, 24);
  fixture::paste_pattern(split, 0, 0);
  CHECK(eval_window(cascade, IntegralImage(split), 0, 0, 1.0));

  // Mirrored pattern: feature is negative, always left.
  GrayImage mirrored(24, 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) mirrored.at(x, y) = x < 12 ? 255 : 0;
  CHECK_FALSE(eval_window(cascade, IntegralImage(mirrored), 0, 0, 1.0));

  CHECK_THROWS_AS(eval_window(cascade, flat, 1, 0, 1.0), BoundsError);
}

TEST_CASE("zero-variance windows behave as std = 1") {
  // With std taken as 1 the stump compares the raw feature against
  // threshold * area, so a constant window flips exactly at feature 0.
  Cascade c;
  c.window_width = c.window_height = 4;
  WeakClassifier w;
  w.rects = {{0, 0, 4, 4, 1.0}};
  w.left_value = -1;
  w.right_value = 1;
  w.threshold = 0.0;
  c.stages.push_back({{w}, 0.0});
  // Inset window is 2x2 (area 4); value 3 gives feature 48 against 0.
  const IntegralImage ii(GrayImage(4, 4, 3));
  CHECK(eval_window(c, ii, 0, 0, 1.0));
  // 48 < 12.5 * 1 * 4 = 50 -> left
  c.stages[0].weak_classifiers[0].threshold = 12.5;
  CHECK_FALSE(eval_window(c, ii, 0, 0, 1.0));
  c.stages[0].weak_classifiers[0].threshold = 11.5;
  CHECK(eval_window(c, ii, 0, 0, 1.0));
}

TEST_CASE("only the aligned window fires; brute force over every position") {
  const auto cascade = fixture::two_rect_cascade();
  const IntegralImage ii(fixture::pattern_image());
  int hits = 0;
  for (int y = 0; y + 24 <= 72; ++y)
    for (int x = 0; x + 24 <= 96; ++x)
      if (eval_window(cascade, ii, x, y, 1.0)) {
        ++hits;
        CHECK(x == 40);
        CHECK(y == 24);
      }
  CHECK(hits == 1);
}

TEST_CASE("detect_multiscale on the hand-built fixture") {
  const auto cascade = fixture::two_rect_cascade();
  const auto found = detect_multiscale(cascade, fixture::pattern_image(), exact_scale());
  REQUIRE(found.size() == 1);
  CHECK(found[0] == Detection{40, 24, 24, 24, 1});
  CHECK(detect_multiscale(cascade, fixture::blank_gray(96, 72), exact_scale()).empty());
  CHECK(detect_multiscale(cascade, GrayImage(96, 72, 128), exact_scale()).empty());
  CHECK(detect_multiscale(cascade, fixture::pattern_image(), exact_scale()) == found);
}

TEST_CASE("blank image yields nothing from the real cascade") {
  const auto cascade = load_cascade(fixture::data("haarcascade_frontalface_default.xml"));
  CHECK(detect_multiscale(cascade, GrayImage(160, 120, 0), {}).empty());
  CHECK(detect_multiscale(cascade, GrayImage(160, 120, 200), {}).empty());
}

TEST_CASE("real cascade detections are deterministic and inside the frame") {
  const auto cascade = load_cascade(fixture::data("haarcascade_frontalface_default.xml"));
  std::mt19937 rng(99);
  const auto img = oracle::random_gray(rng, 120, 90);
  DetectParams p;
  p.min_neighbors = 0;
  const auto a = detect_multiscale(cascade, img, p);
  CHECK(a == detect_multiscale(cascade, img, p));
  for (const auto& d : a) {
    CHECK(d.x >= 0);
    CHECK(d.y >= 0);
    CHECK(d.x + d.w <= img.width);
    CHECK(d.y + d.h <= img.height);
  }
}

TEST_CASE("removing a stage never turns a pass into a fail") {
  const auto full = load_cascade(fixture::data("haarcascade_frontalface_default.xml"));
  std::mt19937 rng(5);
  const auto img = oracle::random_gray(rng, 48, 48);
  const IntegralImage ii(img);
  for (std::size_t drop : {0, 3, 12, 24}) {
    auto reduced = full;
    reduced.stages.erase(reduced.stages.begin() + static_cast<long>(drop));
    for (int y = 0; y + 24 <= 48; y += 2)
      for (int x = 0; x + 24 <= 48; x += 2)
        if (eval_window(full, ii, x, y, 1.0)) CHECK(eval_window(reduced, ii, x, y, 1.0));
  }
}

TEST_CASE("scan scales respect min and max size") {
  auto cascade = fixture::two_rect_cascade();
  auto img = fixture::blank_gray(120, 120);
  DetectParams p;
  p.min_neighbors = 0;
  p.min_size = Size{30, 30};
  p.max_size = Size{40, 40};
  // Every window passes with a permissive stage threshold.
  cascade.stages[0].stage_threshold = -2;
  for (const auto& b : scan_windows(cascade, IntegralImage(img), p)) {
    CHECK(b.w >= 30);
    CHECK(b.w <= 40);
    CHECK(b.w == b.h);
  }
  p.min_size = Size{50, 50};
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = {};
  p.scale_factor = 1.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("group_rectangles hand examples") {
  const std::vector<Box> one{{5, 5, 30, 30}};
  CHECK(group_rectangles(one, 0, 0.2) == std::vector<Detection>{{5, 5, 30, 30, 1}});
  const std::vector<Box> five(5, Box{10, 20, 40, 40});
  CHECK(group_rectangles(five, 3, 0.2) == std::vector<Detection>{{10, 20, 40, 40, 5}});
  CHECK(group_rectangles(five, 5, 0.2).empty());
  CHECK_THROWS_AS(group_rectangles(five, 0, -0.1), DomainError);
}

TEST_CASE("group_rectangles matches the union-find oracle on jittered clusters") {
  std::mt19937 rng(31);
  std::normal_distribution<double> jitter(0.0, 1.5);
  std::vector<Box> boxes;
  for (int i = 0; i < 200; ++i) {
    const int cx = i % 2 ? 40 : 160, cy = i % 2 ? 50 : 90, side = i % 2 ? 48 : 60;
    boxes.push_back({cx + static_cast<int>(std::lround(jitter(rng))), cy + static_cast<int>(std::lround(jitter(rng))),
                     side + static_cast<int>(std::lround(jitter(rng))), side});
  }
  boxes.push_back({300, 10, 30, 30});
  const auto got = group_rectangles(boxes, 3, 0.2);
  CHECK(got.size() == 2);
  CHECK(got == oracle::group(boxes, 3, 0.2));

  // Input order must not matter.
  auto shuffled = boxes;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(group_rectangles(shuffled, 3, 0.2) == got);

  // Idempotent on its own output.
  std::vector<Box> again;
  for (const auto& d : got) again.push_back(d.box());
  const auto regrouped = group_rectangles(again, 0, 0.2);
  REQUIRE(regrouped.size() == got.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(regrouped[i].box() == got[i].box());
}

TEST_CASE("group_rectangles agrees with the oracle on random boxes") {
  std::mt19937 rng(41);
  std::uniform_int_distribution<int> pos(0, 80), side(10, 30);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Box> boxes;
    for (int i = 0; i < 40; ++i) {
      const int s = side(rng);
      boxes.push_back({pos(rng), pos(rng), s, s});
    }
    CHECK(group_rectangles(boxes, 1, 0.2) == oracle::group(boxes, 1, 0.2));
  }
}
