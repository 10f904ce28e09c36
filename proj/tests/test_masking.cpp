#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lpoi/masking.hpp"
#include "lpoi/rng.hpp"
#include "oracles.hpp"

using namespace lpoi;

TEST(MaskFraction, Examples) {
  EXPECT_EQ(mask_fraction(1, 5), 0.0);
  EXPECT_EQ(mask_fraction(5, 5), 1.0);
  EXPECT_EQ(mask_fraction(3, 5), 0.5);
  EXPECT_DOUBLE_EQ(mask_fraction(2, 4), 1.0 / 3.0);
  EXPECT_THROW(mask_fraction(0, 5), Error);
  EXPECT_THROW(mask_fraction(6, 5), Error);
  EXPECT_THROW(mask_fraction(1, 1), Error);
}

TEST(ApplyMask, ZeroFractionIsIdentity) {
  const auto img = oracle::gradient_image(30, 20);
  EXPECT_EQ(apply_mask(img, {3, 4, 20, 15}, 0.0, SweepDirection::TowardNearestEdge), img);
}

TEST(ApplyMask, FullFractionFillsBox) {
  const auto img = oracle::gradient_image(30, 20);
  const BoundingBox box{3, 4, 20, 15};
  const auto out = apply_mask(img, box, 1.0, SweepDirection::TopToBottom, {9, 8, 7});
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 30; ++x) {
      if (box.contains(x, y)) {
        EXPECT_EQ(out.at(x, y), (Rgb{9, 8, 7}));
      } else {
        EXPECT_EQ(out.at(x, y), img.at(x, y));
      }
    }
  }
}

TEST(ApplyMask, HalfOfFortyByTwenty) {
  const auto img = oracle::gradient_image(100, 60);
  const BoundingBox box{30, 20, 70, 40};
  const auto out = apply_mask(img, box, 0.5, SweepDirection::LeftToRight);
  EXPECT_EQ(oracle::masked_in_box(img, out, box, kBlack), 400);
  for (int y = box.y0; y < box.y1; ++y) {
    for (int x = box.x0; x < box.x1; ++x) EXPECT_EQ(out.at(x, y) == kBlack, x < 50) << x << "," << y;
  }
}

TEST(ApplyMask, RejectsBadInput) {
  const auto img = oracle::gradient_image(10, 10);
  try {
    apply_mask(img, {5, 5, 11, 8}, 0.5, SweepDirection::LeftToRight);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BoxOutOfBounds);
  }
  EXPECT_THROW(apply_mask(img, {1, 1, 4, 4}, 1.5, SweepDirection::LeftToRight), Error);
}

TEST(SweepEdge, NearestBorderWithTieOrder) {
  EXPECT_EQ(sweep_edge({2, 10, 10, 20}, 50, 50, SweepDirection::TowardNearestEdge), SweepEdge::Left);
  EXPECT_EQ(sweep_edge({38, 10, 47, 20}, 50, 50, SweepDirection::TowardNearestEdge), SweepEdge::Right);
  EXPECT_EQ(sweep_edge({20, 1, 30, 20}, 50, 50, SweepDirection::TowardNearestEdge), SweepEdge::Top);
  EXPECT_EQ(sweep_edge({20, 30, 30, 49}, 50, 50, SweepDirection::TowardNearestEdge), SweepEdge::Bottom);
  EXPECT_EQ(sweep_edge({5, 5, 45, 45}, 50, 50, SweepDirection::TowardNearestEdge), SweepEdge::Left);
  EXPECT_EQ(sweep_edge({10, 5, 45, 45}, 50, 50, SweepDirection::TowardNearestEdge), SweepEdge::Right);
}

TEST(ResolveMask, RoundsHalfUp) {
  EXPECT_EQ(resolve_lines(0.5, 5), 3);
  EXPECT_EQ(resolve_lines(1.0 / 6.0, 3), 1);
  EXPECT_EQ(resolve_lines(0.25, 2), 1);
  EXPECT_EQ(resolve_lines(0.2, 2), 0);
}

TEST(ResolveMask, NestingAndCount) {
  Rng rng(4);
  for (int c = 0; c < 300; ++c) {
    const int W = 20 + static_cast<int>(rng.uniform_index(60));
    const int H = 20 + static_cast<int>(rng.uniform_index(60));
    const int x0 = static_cast<int>(rng.uniform_index(W - 1));
    const int y0 = static_cast<int>(rng.uniform_index(H - 1));
    const BoundingBox box{x0, y0, x0 + 1 + static_cast<int>(rng.uniform_index(W - x0)),
                          y0 + 1 + static_cast<int>(rng.uniform_index(H - y0))};
    const auto dir = static_cast<SweepDirection>(rng.uniform_index(3));
    const int L = 2 + static_cast<int>(rng.uniform_index(15));
    PixelRect prev{};
    for (int k = 1; k <= L; ++k) {
      const double f = mask_fraction(k, L);
      const auto r = resolve_mask(box, W, H, f, dir);
      const double expected = f * static_cast<double>(box.area());
      EXPECT_LE(std::abs(static_cast<double>(r.pixel_count()) - expected), r.line_length());
      EXPECT_TRUE(r.rect.empty() || (box.contains(r.rect.x0, r.rect.y0) && box.contains(r.rect.x1 - 1, r.rect.y1 - 1)));
      if (!prev.empty()) {
        EXPECT_LE(r.rect.x0, prev.x0);
        EXPECT_LE(r.rect.y0, prev.y0);
        EXPECT_GE(r.rect.x1, prev.x1);
        EXPECT_GE(r.rect.y1, prev.y1);
      }
      prev = r.rect;
    }
  }
}

TEST(ResolveMask, StrictlyIncreasingWhenExtentAllows) {
  for (int L = 2; L <= 16; ++L) {
    for (int extent = L - 1; extent <= 40; ++extent) {
      int last = -1;
      for (int k = 1; k <= L; ++k) {
        const int lines = resolve_lines(mask_fraction(k, L), extent);
        EXPECT_GT(lines, last) << "L=" << L << " extent=" << extent << " k=" << k;
        last = lines;
      }
    }
  }
}

TEST(Prompt, EllipseSurroundsBox) {
  for (int stroke : {1, 2, 3, 5}) {
    for (const BoundingBox box : {BoundingBox{10, 10, 30, 20}, BoundingBox{40, 5, 41, 6}, BoundingBox{3, 7, 60, 55}}) {
      const auto e = prompt_ellipse(box, stroke);
      const auto img = oracle::gradient_image(80, 70);
      const auto out = draw_prompt(img, box, stroke);
      for (int y = box.y0; y < box.y1; ++y) {
        for (int x = box.x0; x < box.x1; ++x) ASSERT_EQ(out.at(x, y), img.at(x, y));
      }
      EXPECT_GE(e.rx, box.width() / 2 + 2);
      EXPECT_GE(e.ry, box.height() / 2 + 2);
    }
  }
}

TEST(Prompt, AxisPointsAreRed) {
  const BoundingBox box{30, 25, 50, 35};
  const auto img = oracle::gradient_image(100, 80);
  const auto out = draw_prompt(img, box, 3);
  const auto e = prompt_ellipse(box, 3);
  for (double t : {0.0, std::numbers::pi / 2, std::numbers::pi, 3 * std::numbers::pi / 2}) {
    const auto [x, y] = oracle::ellipse_point(e.cx, e.cy, e.rx, e.ry, t);
    EXPECT_EQ(out.at(x, y), kRed) << "angle " << t;
  }
}

TEST(Prompt, EditsOnlyNearThePath) {
  const BoundingBox box{30, 25, 50, 35};
  const int stroke = 3;
  const auto img = oracle::gradient_image(100, 80);
  const auto out = draw_prompt(img, box, stroke);
  const auto e = prompt_ellipse(box, stroke);
  for (int y = 0; y < 80; ++y) {
    for (int x = 0; x < 100; ++x) {
      if (out.at(x, y) == img.at(x, y)) continue;
      EXPECT_EQ(out.at(x, y), kRed);
      // Distance in normalised radius from the analytic curve stays within the brush.
      const double nx = (x - e.cx) / static_cast<double>(e.rx);
      const double ny = (y - e.cy) / static_cast<double>(e.ry);
      const double r = std::sqrt(nx * nx + ny * ny);
      const double slack = (stroke + 1.0) / std::min(e.rx, e.ry);
      EXPECT_LE(std::abs(r - 1.0), slack) << x << "," << y;
    }
  }
}

TEST(Prompt, Idempotent) {
  const auto img = oracle::gradient_image(64, 48);
  const BoundingBox box{5, 5, 25, 40};
  const auto once = draw_prompt(img, box, 3);
  EXPECT_EQ(draw_prompt(once, box, 3), once);
}

TEST(Prompt, ClipsAtImageBorder) {
  const auto img = oracle::gradient_image(20, 20);
  EXPECT_NO_THROW(draw_prompt(img, {0, 0, 20, 20}, 3));
  EXPECT_THROW(draw_prompt(img, {0, 0, 21, 20}, 3), Error);
  EXPECT_THROW(draw_prompt(img, {0, 0, 5, 5}, 0), Error);
}

TEST(RankedListTest, EndpointsForTwo) {
  const auto img = oracle::gradient_image(60, 40);
  MaskPlan plan;
  plan.boxes = {{10, 10, 30, 25}};
  plan.list_size = 2;
  const auto list = build_ranked_list(img, plan, "x");
  ASSERT_EQ(list.images.size(), 2u);
  EXPECT_EQ(list.images[0], draw_prompt(img, plan.boxes[0], 3));
  EXPECT_EQ(list.images[1], draw_prompt(apply_mask(img, plan.boxes[0], 1.0, plan.sweep), plan.boxes[0], 3));
}

TEST(RankedListTest, FractionsAndMonotoneOcclusion) {
  const auto img = oracle::gradient_image(60, 40);
  MaskPlan plan;
  plan.boxes = {{10, 10, 30, 25}, {35, 5, 55, 35}};
  plan.list_size = 5;
  plan.prompt = PromptStyle::None;  // strokes of one box may cross the other
  const auto list = build_ranked_list(img, plan, "x");
  EXPECT_EQ(list.fractions, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  std::int64_t last = -1;
  for (const auto& im : list.images) {
    std::int64_t n = 0;
    for (const auto& b : plan.boxes) n += oracle::masked_in_box(img, im, b, kBlack);
    EXPECT_GT(n, last);
    last = n;
  }
  EXPECT_EQ(last, plan.boxes[0].area() + plan.boxes[1].area());
}

TEST(RankedListTest, NoPromptLeavesOutsideUntouched) {
  const auto img = oracle::gradient_image(40, 40);
  MaskPlan plan;
  plan.boxes = {{10, 10, 20, 30}};
  plan.prompt = PromptStyle::None;
  const auto list = build_ranked_list(img, plan);
  EXPECT_EQ(list.images.front(), img);
}

TEST(RankedListTest, Deterministic) {
  const auto img = oracle::gradient_image(40, 40);
  MaskPlan plan;
  plan.boxes = {{3, 4, 33, 24}};
  EXPECT_EQ(build_ranked_list(img, plan, "a"), build_ranked_list(img, plan, "a"));
}

TEST(Visibility, FromGeometry) {
  MaskPlan plan;
  plan.boxes = {{0, 0, 10, 10}};
  plan.sweep = SweepDirection::LeftToRight;
  EXPECT_EQ(plan_visibility(plan, 20, 20, 1), 1.0);
  EXPECT_EQ(plan_visibility(plan, 20, 20, 5), 0.0);
  EXPECT_NEAR(plan_visibility(plan, 20, 20, 3), 0.5, 0.1);
}
