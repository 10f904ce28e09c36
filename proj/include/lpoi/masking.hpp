// Fractional box masking, list interpolation and red-circle prompting.
//
// All geometry is integer and deterministic. A fraction of a box resolves to
// whole sweep lines (columns for horizontal sweeps, rows for vertical ones),
// rounded half-up, so masked pixel counts are exact and testable.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lpoi/core.hpp"

namespace lpoi {

/// Fraction of the box masked for the k-th list element (1-based).
inline double mask_fraction(int k, int list_size) {
  if (list_size < kMinListSize) {
    throw Error(ErrorKind::OutOfRange, "list size must be >= 2, got " + std::to_string(list_size));
  }
  if (k < 1 || k > list_size) {
    throw Error(ErrorKind::OutOfRange,
                "list index " + std::to_string(k) + " outside [1, " + std::to_string(list_size) + "]");
  }
  return static_cast<double>(k - 1) / static_cast<double>(list_size - 1);
}

/// Box side the sweep starts from.
enum class SweepEdge { Left, Right, Top, Bottom };

inline bool is_horizontal(SweepEdge e) { return e == SweepEdge::Left || e == SweepEdge::Right; }

/// Possibly empty half-open pixel rectangle.
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  bool empty() const { return x1 <= x0 || y1 <= y0; }
  std::int64_t area() const { return empty() ? 0 : static_cast<std::int64_t>(x1 - x0) * (y1 - y0); }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

struct MaskRegion {
  BoundingBox box;
  double fraction = 0.0;
  SweepDirection direction = SweepDirection::TowardNearestEdge;
  SweepEdge edge = SweepEdge::Left;
  int lines = 0;   // whole sweep lines masked
  PixelRect rect;  // the resolved pixels; always a sub-rectangle of box

  std::int64_t pixel_count() const { return rect.area(); }
  int line_length() const { return is_horizontal(edge) ? box.height() : box.width(); }
};

/// Edge a sweep starts from. For TowardNearestEdge this is the box side
/// closest to an image border; ties prefer left, right, top, bottom.
inline SweepEdge sweep_edge(const BoundingBox& box, int image_width, int image_height, SweepDirection direction) {
  switch (direction) {
    case SweepDirection::LeftToRight: return SweepEdge::Left;
    case SweepDirection::TopToBottom: return SweepEdge::Top;
    case SweepDirection::TowardNearestEdge: break;
  }
  const int left = box.x0;
  const int right = image_width - box.x1;
  const int top = box.y0;
  const int bottom = image_height - box.y1;
  SweepEdge best = SweepEdge::Left;
  int best_distance = left;
  if (right < best_distance) best = SweepEdge::Right, best_distance = right;
  if (top < best_distance) best = SweepEdge::Top, best_distance = top;
  if (bottom < best_distance) best = SweepEdge::Bottom;
  return best;
}

/// Number of sweep lines for `fraction` of `extent` lines, rounded half-up.
/// The 1e-9 slack absorbs the representation error of (k-1)/(L-1) so that
/// exact halves such as 1/6 * 3 round up as they would in exact arithmetic.
inline int resolve_lines(double fraction, int extent) {
  const double raw = std::floor(fraction * static_cast<double>(extent) + 0.5 + 1e-9);
  return std::clamp(static_cast<int>(raw), 0, extent);
}

inline MaskRegion resolve_mask(const BoundingBox& box, int image_width, int image_height, double fraction,
                               SweepDirection direction) {
  validate_box(box, image_width, image_height);
  if (!std::isfinite(fraction) || fraction < 0.0 || fraction > 1.0) {
    throw Error(ErrorKind::OutOfRange, "mask fraction " + std::to_string(fraction) + " outside [0, 1]");
  }
  MaskRegion region;
  region.box = box;
  region.fraction = fraction;
  region.direction = direction;
  region.edge = sweep_edge(box, image_width, image_height, direction);
  const int extent = is_horizontal(region.edge) ? box.width() : box.height();
  region.lines = resolve_lines(fraction, extent);
  PixelRect r{box.x0, box.y0, box.x1, box.y1};
  switch (region.edge) {
    case SweepEdge::Left: r.x1 = box.x0 + region.lines; break;
    case SweepEdge::Right: r.x0 = box.x1 - region.lines; break;
    case SweepEdge::Top: r.y1 = box.y0 + region.lines; break;
    case SweepEdge::Bottom: r.y0 = box.y1 - region.lines; break;
  }
  region.rect = r;
  return region;
}

inline void fill_rect(Image& image, const PixelRect& rect, Rgb color) {
  for (int y = rect.y0; y < rect.y1; ++y) {
    for (int x = rect.x0; x < rect.x1; ++x) image.set(x, y, color);
  }
}

inline Image apply_mask(const Image& image, const BoundingBox& box, double fraction, SweepDirection direction,
                        Rgb fill = kBlack) {
  validate_image(image);
  const auto region = resolve_mask(box, image.width, image.height, fraction, direction);
  Image out = image;
  fill_rect(out, region.rect, fill);
  return out;
}

/// Axis-aligned ellipse with integer centre and semi-axes.
struct Ellipse {
  int cx = 0;
  int cy = 0;
  int rx = 0;
  int ry = 0;
};

/// The prompt ellipse fully encloses the box: semi-axes are the half extents
/// scaled by sqrt(2) (which puts the corners on the unpadded ellipse), plus
/// 2 px of padding beyond the brush reach so the stroke never enters the box.
inline Ellipse prompt_ellipse(const BoundingBox& box, int stroke_width) {
  const double half_w = box.width() / 2.0;
  const double half_h = box.height() / 2.0;
  const int padding = 2 + stroke_width / 2;
  Ellipse e;
  e.cx = box.x0 + (box.width() - 1) / 2;
  e.cy = box.y0 + (box.height() - 1) / 2;
  e.rx = static_cast<int>(std::ceil(half_w * std::sqrt(2.0))) + padding;
  e.ry = static_cast<int>(std::ceil(half_h * std::sqrt(2.0))) + padding;
  return e;
}

/// Midpoint ellipse rasterisation (integer arithmetic, decision values scaled
/// by 4). Returns every path pixel, including the four axis extremes.
inline std::vector<std::pair<int, int>> ellipse_path(const Ellipse& e) {
  std::vector<std::pair<int, int>> points;
  auto plot4 = [&](std::int64_t x, std::int64_t y) {
    const int px = static_cast<int>(x);
    const int py = static_cast<int>(y);
    points.emplace_back(e.cx + px, e.cy + py);
    points.emplace_back(e.cx - px, e.cy + py);
    points.emplace_back(e.cx + px, e.cy - py);
    points.emplace_back(e.cx - px, e.cy - py);
  };
  const std::int64_t rx2 = static_cast<std::int64_t>(e.rx) * e.rx;
  const std::int64_t ry2 = static_cast<std::int64_t>(e.ry) * e.ry;
  std::int64_t x = 0;
  std::int64_t y = e.ry;
  std::int64_t dx = 0;
  std::int64_t dy = 2 * rx2 * y;
  std::int64_t d1 = 4 * ry2 - 4 * rx2 * e.ry + rx2;
  while (dx < dy) {
    plot4(x, y);
    ++x;
    dx += 2 * ry2;
    if (d1 < 0) {
      d1 += 4 * (dx + ry2);
    } else {
      --y;
      dy -= 2 * rx2;
      d1 += 4 * (dx - dy + ry2);
    }
  }
  std::int64_t d2 = ry2 * (2 * x + 1) * (2 * x + 1) + 4 * rx2 * (y - 1) * (y - 1) - 4 * rx2 * ry2;
  while (y >= 0) {
    plot4(x, y);
    --y;
    dy -= 2 * rx2;
    if (d2 > 0) {
      d2 += 4 * (rx2 - dy);
    } else {
      ++x;
      dx += 2 * ry2;
      d2 += 4 * (dx - dy + rx2);
    }
  }
  // The loop can stop one column short of the horizontal extremes on very
  // flat ellipses; the extremes are part of the path by definition.
  points.emplace_back(e.cx + e.rx, e.cy);
  points.emplace_back(e.cx - e.rx, e.cy);
  points.emplace_back(e.cx, e.cy + e.ry);
  points.emplace_back(e.cx, e.cy - e.ry);
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return points;
}

/// Stamp a square brush of side stroke_width on every path pixel, clipped to
/// the image.
inline void stroke_ellipse(Image& image, const Ellipse& e, int stroke_width, Rgb color) {
  const int lo = -(stroke_width - 1) / 2;
  const int hi = stroke_width / 2;
  for (const auto& [px, py] : ellipse_path(e)) {
    for (int oy = lo; oy <= hi; ++oy) {
      for (int ox = lo; ox <= hi; ++ox) {
        const int x = px + ox;
        const int y = py + oy;
        if (image.contains(x, y)) image.set(x, y, color);
      }
    }
  }
}

inline Image draw_prompt(const Image& image, const BoundingBox& box, int stroke_width = 3) {
  validate_image(image);
  validate_box(box, image.width, image.height);
  if (stroke_width < 1) throw Error(ErrorKind::InvalidArgument, "stroke width must be >= 1");
  Image out = image;
  stroke_ellipse(out, prompt_ellipse(box, stroke_width), stroke_width, kRed);
  return out;
}

/// Renders one list element: every box masked at `fraction`, then (if the
/// plan asks for it) every box circled. Masks go first so a stroke from one
/// box can overlay another box but never the other way round.
inline Image render_list_element(const Image& image, const MaskPlan& plan, double fraction) {
  Image out = image;
  for (const auto& box : plan.boxes) {
    fill_rect(out, resolve_mask(box, image.width, image.height, fraction, plan.sweep).rect, plan.fill);
  }
  if (plan.prompt == PromptStyle::RedCircle) {
    for (const auto& box : plan.boxes) stroke_ellipse(out, prompt_ellipse(box, plan.stroke_width), plan.stroke_width, kRed);
  }
  return out;
}

inline RankedList build_ranked_list(const Image& image, const MaskPlan& plan, std::string sample_id = {}) {
  validate_image(image);
  validate_plan(plan, image.width, image.height);
  RankedList list;
  list.sample_id = std::move(sample_id);
  list.plan = plan;
  list.images.reserve(static_cast<std::size_t>(plan.list_size));
  list.fractions.reserve(static_cast<std::size_t>(plan.list_size));
  for (int k = 1; k <= plan.list_size; ++k) {
    const double f = mask_fraction(k, plan.list_size);
    list.fractions.push_back(f);
    list.images.push_back(render_list_element(image, plan, f));
  }
  return list;
}

/// Mean unmasked share of the plan's boxes at list position k, computed from
/// the resolved geometry (not from pixel values).
inline double plan_visibility(const MaskPlan& plan, int image_width, int image_height, int k) {
  const double f = mask_fraction(k, plan.list_size);
  double sum = 0.0;
  for (const auto& box : plan.boxes) {
    const auto region = resolve_mask(box, image_width, image_height, f, plan.sweep);
    sum += 1.0 - static_cast<double>(region.pixel_count()) / static_cast<double>(box.area());
  }
  return plan.boxes.empty() ? 1.0 : sum / static_cast<double>(plan.boxes.size());
}

}  // namespace lpoi
