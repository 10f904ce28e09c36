// Shared domain types for the listwise preference toolkit.
//
// Everything here is a plain value type. Validation lives in free
// functions so that callers can build a value, inspect it, and decide
// whether to reject it (the dataset readers rely on that).

#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lpoi {

enum class ErrorKind {
  InvalidSample,
  InvalidArgument,
  OutOfRange,
  BoxOutOfBounds,
  NonFinite,
  EmptyList,
  NoDetections,
  VerifierUnavailable,
  IoError,
  FormatError,
  DimensionMismatch,
  Diverged,
  UnknownScene,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidSample: return "InvalidSample";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::BoxOutOfBounds: return "BoxOutOfBounds";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::EmptyList: return "EmptyList";
    case ErrorKind::NoDetections: return "NoDetections";
    case ErrorKind::VerifierUnavailable: return "VerifierUnavailable";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::UnknownScene: return "UnknownScene";
  }
  return "Unknown";
}

/// Error type thrown by every module. The kind is the machine-readable part;
/// the message carries the field-level reason.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kRed{255, 0, 0};

/// Row-major 8-bit RGB image. Kept as an open struct so corrupt buffers can be
/// represented (and rejected by validate_image) rather than being impossible.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, Rgb fill = kBlack)
      : width(w), height(h), pixels(static_cast<std::size_t>(w > 0 ? w : 0) * (h > 0 ? h : 0) * 3) {
    for (std::size_t i = 0; i + 2 < pixels.size(); i += 3) {
      pixels[i] = fill.r;
      pixels[i + 1] = fill.g;
      pixels[i + 2] = fill.b;
    }
  }

  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
  }
  Rgb at(int x, int y) const {
    const auto o = offset(x, y);
    return {pixels[o], pixels[o + 1], pixels[o + 2]};
  }
  void set(int x, int y, Rgb c) {
    const auto o = offset(x, y);
    pixels[o] = c.r;
    pixels[o + 1] = c.g;
    pixels[o + 2] = c.b;
  }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  friend bool operator==(const Image&, const Image&) = default;
};

inline std::optional<std::string> image_problem(const Image& image) {
  if (image.width < 1 || image.height < 1) {
    return "image dimensions must be at least 1x1, got " + std::to_string(image.width) + "x" +
           std::to_string(image.height);
  }
  const auto expected = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height) * 3;
  if (image.pixels.size() != expected) {
    return "pixel buffer holds " + std::to_string(image.pixels.size()) + " bytes, expected " +
           std::to_string(expected);
  }
  return std::nullopt;
}

inline void validate_image(const Image& image, ErrorKind kind = ErrorKind::InvalidArgument) {
  if (auto problem = image_problem(image)) throw Error(kind, *problem);
}

/// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool intersects(const BoundingBox& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline std::string to_string(const BoundingBox& b) {
  return "[" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," + std::to_string(b.x1) + "," +
         std::to_string(b.y1) + "]";
}

inline void validate_box(const BoundingBox& box, int image_width, int image_height) {
  if (box.x0 < 0 || box.y0 < 0 || box.x0 >= box.x1 || box.y0 >= box.y1 || box.x1 > image_width ||
      box.y1 > image_height) {
    throw Error(ErrorKind::BoxOutOfBounds, "box " + to_string(box) + " not inside " + std::to_string(image_width) +
                                               "x" + std::to_string(image_height) + " image");
  }
}

struct PreferenceSample {
  std::string id;
  std::string image_path;
  std::string question;
  std::string chosen;
  std::string rejected;

  friend bool operator==(const PreferenceSample&, const PreferenceSample&) = default;
};

/// Sample ids end up in file names, so they are restricted to a portable set.
inline bool is_valid_sample_id(std::string_view id) {
  if (id.empty() || id == "." || id == "..") return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    if (!ok) return false;
  }
  return true;
}

inline const PreferenceSample& validate_sample(const PreferenceSample& sample, const Image& image) {
  auto fail = [&](const std::string& field, const std::string& reason) {
    throw Error(ErrorKind::InvalidSample, "sample '" + sample.id + "' field '" + field + "': " + reason);
  };
  if (!is_valid_sample_id(sample.id)) fail("id", "must be non-empty and use only [A-Za-z0-9._-]");
  if (sample.question.empty()) fail("question", "empty text");
  if (sample.chosen.empty()) fail("chosen", "empty text");
  if (sample.chosen == sample.rejected) fail("rejected", "identical to chosen");
  if (auto problem = image_problem(image)) fail("image", *problem);
  return sample;
}

enum class SweepDirection { TowardNearestEdge, LeftToRight, TopToBottom };
enum class PromptStyle { RedCircle, None };

inline std::string_view to_string(SweepDirection d) {
  switch (d) {
    case SweepDirection::TowardNearestEdge: return "nearest-edge";
    case SweepDirection::LeftToRight: return "left-to-right";
    case SweepDirection::TopToBottom: return "top-to-bottom";
  }
  return "nearest-edge";
}

inline SweepDirection parse_sweep(std::string_view text) {
  if (text == "nearest-edge" || text == "toward-nearest-image-edge") return SweepDirection::TowardNearestEdge;
  if (text == "left-to-right") return SweepDirection::LeftToRight;
  if (text == "top-to-bottom") return SweepDirection::TopToBottom;
  throw Error(ErrorKind::InvalidArgument, "unknown sweep direction '" + std::string(text) + "'");
}

inline std::string_view to_string(PromptStyle p) { return p == PromptStyle::RedCircle ? "red-circle" : "none"; }

inline PromptStyle parse_prompt(std::string_view text) {
  if (text == "red-circle") return PromptStyle::RedCircle;
  if (text == "none") return PromptStyle::None;
  throw Error(ErrorKind::InvalidArgument, "unknown prompt style '" + std::string(text) + "'");
}

inline constexpr int kMinListSize = 2;
inline constexpr int kMaxListSize = 16;
inline constexpr std::size_t kMaxMaskBoxes = 4;

struct MaskPlan {
  std::vector<BoundingBox> boxes;
  int list_size = 5;
  SweepDirection sweep = SweepDirection::TowardNearestEdge;
  PromptStyle prompt = PromptStyle::RedCircle;
  Rgb fill = kBlack;
  int stroke_width = 3;

  friend bool operator==(const MaskPlan&, const MaskPlan&) = default;
};

inline void validate_list_size(int list_size) {
  if (list_size < kMinListSize || list_size > kMaxListSize) {
    throw Error(ErrorKind::OutOfRange, "list size " + std::to_string(list_size) + " outside [" +
                                           std::to_string(kMinListSize) + ", " + std::to_string(kMaxListSize) + "]");
  }
}

inline void validate_plan(const MaskPlan& plan, int image_width, int image_height) {
  validate_list_size(plan.list_size);
  if (plan.boxes.empty() || plan.boxes.size() > kMaxMaskBoxes) {
    throw Error(ErrorKind::InvalidArgument,
                "mask plan needs 1.." + std::to_string(kMaxMaskBoxes) + " boxes, got " +
                    std::to_string(plan.boxes.size()));
  }
  if (plan.stroke_width < 1) throw Error(ErrorKind::InvalidArgument, "stroke width must be >= 1");
  for (const auto& box : plan.boxes) validate_box(box, image_width, image_height);
}

struct RankedList {
  std::string sample_id;
  std::vector<Image> images;
  std::vector<double> fractions;
  MaskPlan plan;

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

struct Hyperparams {
  double beta = 0.1;
  double delta = 0.0;
  int list_size = 5;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

inline void validate_hyperparams(const Hyperparams& h) {
  if (!(h.beta > 0.0) || !std::isfinite(h.beta)) {
    throw Error(ErrorKind::InvalidArgument, "beta must be finite and > 0");
  }
  if (!std::isfinite(h.delta)) throw Error(ErrorKind::InvalidArgument, "delta must be finite");
  validate_list_size(h.list_size);
}

struct LossBreakdown {
  double dpo = 0.0;
  double anchor = 0.0;
  double listwise = 0.0;
  double total = 0.0;

  static LossBreakdown of(double dpo, double anchor, double listwise) {
    return {dpo, anchor, listwise, dpo + anchor + listwise};
  }

  LossBreakdown& operator+=(const LossBreakdown& o) {
    dpo += o.dpo;
    anchor += o.anchor;
    listwise += o.listwise;
    total += o.total;
    return *this;
  }
  LossBreakdown scaled(double s) const { return {dpo * s, anchor * s, listwise * s, total * s}; }
  bool finite() const {
    return std::isfinite(dpo) && std::isfinite(anchor) && std::isfinite(listwise) && std::isfinite(total);
  }
};

}  // namespace lpoi
