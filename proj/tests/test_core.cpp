#include <gtest/gtest.h>

#include "lpoi/core.hpp"
#include "lpoi/masking.hpp"
#include "lpoi/rng.hpp"

using namespace lpoi;

namespace {

PreferenceSample good_sample() { return {"s-01", "img.png", "What is shown?", "A dog.", "A cat."}; }

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no lpoi::Error thrown";
  return ErrorKind::IoError;
}

}  // namespace

TEST(ValidateSample, WellFormedPassesUnchanged) {
  const Image img(4, 3);
  const auto s = good_sample();
  EXPECT_EQ(&validate_sample(s, img), &s);
  EXPECT_EQ(validate_sample(s, img), good_sample());
}

TEST(ValidateSample, Rejections) {
  const Image img(4, 3);
  auto s = good_sample();
  s.rejected = s.chosen;
  EXPECT_EQ(kind_of([&] { validate_sample(s, img); }), ErrorKind::InvalidSample);
  s = good_sample();
  s.question.clear();
  EXPECT_EQ(kind_of([&] { validate_sample(s, img); }), ErrorKind::InvalidSample);
  s = good_sample();
  s.chosen.clear();
  EXPECT_EQ(kind_of([&] { validate_sample(s, img); }), ErrorKind::InvalidSample);
  s = good_sample();
  s.id = "a/b";
  EXPECT_EQ(kind_of([&] { validate_sample(s, img); }), ErrorKind::InvalidSample);
}

TEST(ValidateSample, CorruptBuffer) {
  Image img(4, 3);
  img.pixels.pop_back();
  EXPECT_EQ(kind_of([&] { validate_sample(good_sample(), img); }), ErrorKind::InvalidSample);
  Image empty;
  EXPECT_EQ(kind_of([&] { validate_sample(good_sample(), empty); }), ErrorKind::InvalidSample);
}

TEST(BoundingBoxTest, Validation) {
  EXPECT_NO_THROW(validate_box({0, 0, 10, 10}, 10, 10));
  EXPECT_EQ(kind_of([] { validate_box({0, 0, 11, 10}, 10, 10); }), ErrorKind::BoxOutOfBounds);
  EXPECT_EQ(kind_of([] { validate_box({3, 3, 3, 5}, 10, 10); }), ErrorKind::BoxOutOfBounds);
  EXPECT_EQ(kind_of([] { validate_box({-1, 0, 3, 5}, 10, 10); }), ErrorKind::BoxOutOfBounds);
  EXPECT_EQ((BoundingBox{2, 3, 7, 5}.area()), 10);
  EXPECT_FALSE((BoundingBox{0, 0, 2, 2}.intersects({2, 0, 4, 2})));
  EXPECT_TRUE((BoundingBox{0, 0, 3, 3}.intersects({2, 2, 4, 4})));
}

TEST(Hyperparameters, Validation) {
  EXPECT_NO_THROW(validate_hyperparams({}));
  EXPECT_THROW(validate_hyperparams({0.0, 0.0, 5}), Error);
  EXPECT_THROW(validate_hyperparams({0.1, 0.0, 1}), Error);
  EXPECT_THROW(validate_hyperparams({0.1, 0.0, 17}), Error);
  const Hyperparams h;
  EXPECT_EQ(h.beta, 0.1);
  EXPECT_EQ(h.delta, 0.0);
}

TEST(LossBreakdownTest, TotalIsSum) {
  const auto b = LossBreakdown::of(0.25, 0.5, 1.125);
  EXPECT_EQ(b.total, 1.875);
  auto acc = b;
  acc += b;
  EXPECT_EQ(acc.scaled(0.5).total, b.total);
}

TEST(Enums, RoundTrip) {
  for (auto d : {SweepDirection::TowardNearestEdge, SweepDirection::LeftToRight, SweepDirection::TopToBottom}) {
    EXPECT_EQ(parse_sweep(to_string(d)), d);
  }
  EXPECT_EQ(parse_prompt("none"), PromptStyle::None);
  EXPECT_THROW(parse_sweep("diagonal"), Error);
}

TEST(MaskFractions, ExactForAllListSizes) {
  for (int L = kMinListSize; L <= kMaxListSize; ++L) {
    EXPECT_EQ(mask_fraction(1, L), 0.0);
    EXPECT_EQ(mask_fraction(L, L), 1.0);
    for (int k = 1; k <= L; ++k) {
      EXPECT_EQ(mask_fraction(k, L), static_cast<double>(k - 1) / static_cast<double>(L - 1));
      if (k > 1) EXPECT_LT(mask_fraction(k - 1, L), mask_fraction(k, L));
    }
  }
}

TEST(Rng, Reproducible) {
  Rng a(99);
  Rng b(99);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(derive_seed(1, "x"), derive_seed(1, "y"));
  EXPECT_NE(derive_seed(1, "x"), derive_seed(2, "x"));
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Rng, UniformIndexCoversRange) {
  Rng r(1);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[r.uniform_index(7)];
  for (int h : hits) EXPECT_GT(h, 800);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform01();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}
