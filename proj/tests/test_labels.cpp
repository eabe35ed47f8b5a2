#include <doctest.h>

#include "emorf/labels.hpp"

using namespace emorf::labels;

TEST_CASE("binarize at 4.5") {
  CHECK(binarize(4.4f) == Level::kLow);
  CHECK(binarize(4.5f) == Level::kHigh);
  CHECK(binarize(9.0f) == Level::kHigh);
  CHECK(binarize(1.0f) == Level::kLow);
  CHECK_THROWS_AS(binarize(0.99f), std::out_of_range);
  CHECK_THROWS_AS(binarize(9.01f), std::out_of_range);
  CHECK(binary_class(3.0f) == 1);
  CHECK(binary_class(6.0f) == 2);
}

TEST_CASE("binarize is monotone") {
  Level prev = Level::kLow;
  for (int i = 0; i <= 800; ++i) {
    const auto l = binarize(1.0f + 0.01f * static_cast<float>(i));
    CHECK(static_cast<int>(l) >= static_cast<int>(prev));
    prev = l;
  }
}

TEST_CASE("quad classes") {
  CHECK(quad_class(3.0f, 7.0f) == 2);
  CHECK(quad_class(4.5f, 4.5f) == 4);
  CHECK(quad_class(1.0f, 1.0f) == 1);
  CHECK(quad_class(7.0f, 2.0f) == 3);
  for (float v = 1.0f; v <= 9.0f; v += 0.25f) {
    for (float a = 1.0f; a <= 9.0f; a += 0.25f) {
      CHECK(quad_class(v, a) == 2 * (v >= 4.5f) + (a >= 4.5f) + 1);
    }
  }
}

TEST_CASE("oct classes") {
  CHECK(oct_class(1, 1, 1) == 1);
  CHECK(oct_class(9, 9, 9) == 8);
  CHECK(oct_class(3, 7, 3) == 3);
  const int projected[] = {1, 3, 5, 7};
  for (float v : {2.0f, 7.0f}) {
    for (float a : {2.0f, 7.0f}) {
      const int oct = oct_class(v, a, 2.0f);
      CHECK(oct == projected[quad_class(v, a) - 1]);
      CHECK(oct_class(v, a, 8.0f) == oct + 1);
    }
  }
}

TEST_CASE("modes") {
  CHECK(class_count(LabelMode::kValence) == 2);
  CHECK(class_count(LabelMode::kArousal) == 2);
  CHECK(class_count(LabelMode::kQuad) == 4);
  CHECK(class_count(LabelMode::kOct) == 8);
  for (auto m : {LabelMode::kValence, LabelMode::kArousal, LabelMode::kQuad, LabelMode::kOct}) {
    CHECK(parse_mode(to_string(m)) == m);
  }
  CHECK_FALSE(parse_mode("dominance").has_value());

  const emorf::corpus::TrialRatings r{3.0f, 7.0f, 8.0f, 1.0f};
  CHECK(label_of(r, LabelMode::kValence) == 1);
  CHECK(label_of(r, LabelMode::kArousal) == 2);
  CHECK(label_of(r, LabelMode::kQuad) == 2);
  CHECK(label_of(r, LabelMode::kOct) == 4);
  CHECK(label_all({r, {9, 9, 9, 9}}, LabelMode::kQuad) == std::vector<int>{2, 4});
}
