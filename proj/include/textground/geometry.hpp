#pragma once

#include <array>
#include <vector>

#include "textground/trace.hpp"

namespace textground {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Quadrilateral in pixel coordinates, vertices in boundary order.
struct Quad {
  std::array<Point, 4> pts;

  static Quad axis_aligned(double x0, double y0, double x1, double y1) {
    return Quad{{Point{x0, y0}, Point{x1, y0}, Point{x1, y1}, Point{x0, y1}}};
  }
  double area() const;
};

// Minimum patch-area fraction covered by the union of boxes for a token to be
// counted as a text-region token.
inline constexpr double kPatchOverlapThreshold = 0.5;

// Area of (union of quads) ∩ [x0, x1] x [y0, y1].
double union_area_in_rect(const std::vector<Quad>& quads, double x0, double y0, double x1, double y1);

// Maps pixel boxes to the image tokens whose patch cell is at least half
// covered by their union. Scores are the covered fractions; origin is
// ground_truth_boxes. Zero-area boxes are ignored.
TokenSelection boxes_to_tokens(const std::vector<Quad>& boxes, const TokenLayout& layout);

}  // namespace textground
