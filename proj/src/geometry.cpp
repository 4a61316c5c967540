#include "textground/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "textground/error.hpp"

namespace textground {

namespace {

struct Segment {
  Point a;
  Point b;
};

std::vector<Segment> edges_of(const Quad& q) {
  std::vector<Segment> out;
  for (std::size_t i = 0; i < 4; ++i) out.push_back({q.pts[i], q.pts[(i + 1) % 4]});
  return out;
}

// x-coordinate where two segments cross, if they cross at a single point.
bool crossing_x(const Segment& s, const Segment& t, double& x) {
  const double rx = s.b.x - s.a.x, ry = s.b.y - s.a.y;
  const double sx = t.b.x - t.a.x, sy = t.b.y - t.a.y;
  const double denom = rx * sy - ry * sx;
  if (denom == 0.0) return false;
  const double qx = t.a.x - s.a.x, qy = t.a.y - s.a.y;
  const double u = (qx * sy - qy * sx) / denom;
  const double v = (qx * ry - qy * rx) / denom;
  if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) return false;
  x = s.a.x + u * rx;
  return true;
}

// x-coordinate where a segment crosses the horizontal line y = level.
bool level_x(const Segment& s, double level, double& x) {
  const double lo = std::min(s.a.y, s.b.y), hi = std::max(s.a.y, s.b.y);
  if (s.a.y == s.b.y || level < lo || level > hi) return false;
  const double t = (level - s.a.y) / (s.b.y - s.a.y);
  x = s.a.x + t * (s.b.x - s.a.x);
  return true;
}

double covered_length(const std::vector<std::vector<Segment>>& polys, double x, double y0, double y1) {
  std::vector<std::pair<double, double>> intervals;
  std::vector<double> ys;
  for (const auto& poly : polys) {
    ys.clear();
    for (const auto& e : poly) {
      const double lo = std::min(e.a.x, e.b.x), hi = std::max(e.a.x, e.b.x);
      if (!(x > lo && x < hi)) continue;
      const double t = (x - e.a.x) / (e.b.x - e.a.x);
      ys.push_back(e.a.y + t * (e.b.y - e.a.y));
    }
    std::sort(ys.begin(), ys.end());
    for (std::size_t i = 0; i + 1 < ys.size(); i += 2) {
      const double lo = std::max(ys[i], y0), hi = std::min(ys[i + 1], y1);
      if (hi > lo) intervals.emplace_back(lo, hi);
    }
  }
  std::sort(intervals.begin(), intervals.end());
  double total = 0.0, cur_lo = 0.0, cur_hi = 0.0;
  bool open = false;
  for (const auto& [lo, hi] : intervals) {
    if (!open || lo > cur_hi) {
      if (open) total += cur_hi - cur_lo;
      cur_lo = lo;
      cur_hi = hi;
      open = true;
    } else {
      cur_hi = std::max(cur_hi, hi);
    }
  }
  if (open) total += cur_hi - cur_lo;
  return total;
}

}  // namespace

double Quad::area() const {
  double twice = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& p = pts[i];
    const auto& q = pts[(i + 1) % 4];
    twice += p.x * q.y - q.x * p.y;
  }
  return std::abs(twice) / 2.0;
}

// Integrates the covered vertical extent over x. Between consecutive critical
// abscissae (vertices, edge crossings, crossings of the rectangle's horizontal
// sides) the covered length is linear in x, so the midpoint rule is exact.
double union_area_in_rect(const std::vector<Quad>& quads, double x0, double y0, double x1, double y1) {
  if (x1 <= x0 || y1 <= y0) return 0.0;
  std::vector<std::vector<Segment>> polys;
  for (const auto& q : quads) {
    if (q.area() > 0.0) polys.push_back(edges_of(q));
  }
  if (polys.empty()) return 0.0;

  std::vector<Segment> all;
  for (const auto& p : polys) all.insert(all.end(), p.begin(), p.end());

  std::vector<double> xs{x0, x1};
  for (const auto& e : all) {
    xs.push_back(e.a.x);
    double x;
    if (level_x(e, y0, x)) xs.push_back(x);
    if (level_x(e, y1, x)) xs.push_back(x);
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      double x;
      if (crossing_x(all[i], all[j], x)) xs.push_back(x);
    }
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  double area = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double a = std::max(xs[i], x0), b = std::min(xs[i + 1], x1);
    if (b <= a) continue;
    area += (b - a) * covered_length(polys, 0.5 * (a + b), y0, y1);
  }
  return area;
}

TokenSelection boxes_to_tokens(const std::vector<Quad>& boxes, const TokenLayout& layout) {
  std::vector<Quad> live;
  for (const auto& box : boxes) {
    for (const auto& p : box.pts) {
      if (!(p.x >= 0.0 && p.x <= static_cast<double>(layout.image_w) && p.y >= 0.0 &&
            p.y <= static_cast<double>(layout.image_h))) {
        std::ostringstream os;
        os << "box vertex (" << p.x << ", " << p.y << ") lies outside the " << layout.image_w << "x"
           << layout.image_h << " image";
        throw ValidationError(os.str());
      }
    }
    if (box.area() > 0.0) live.push_back(box);
  }

  std::vector<std::pair<std::size_t, double>> scored;
  if (live.empty()) return make_selection(std::move(scored), SelectionOrigin::ground_truth_boxes);

  double bx0 = layout.image_w, by0 = layout.image_h, bx1 = 0.0, by1 = 0.0;
  for (const auto& q : live) {
    for (const auto& p : q.pts) {
      bx0 = std::min(bx0, p.x);
      by0 = std::min(by0, p.y);
      bx1 = std::max(bx1, p.x);
      by1 = std::max(by1, p.y);
    }
  }

  const double ps = static_cast<double>(layout.patch_size);
  const double cell_area = ps * ps;
  for (std::size_t row = 0; row < layout.grid_h; ++row) {
    const double y0 = row * ps, y1 = y0 + ps;
    if (y1 <= by0 || y0 >= by1) continue;
    for (std::size_t col = 0; col < layout.grid_w; ++col) {
      const double x0 = col * ps, x1 = x0 + ps;
      if (x1 <= bx0 || x0 >= bx1) continue;
      const double fraction = union_area_in_rect(live, x0, y0, x1, y1) / cell_area;
      // Guards against the threshold being missed by a rounding ulp.
      if (fraction >= kPatchOverlapThreshold - 1e-12) {
        scored.emplace_back(layout.token_at(row, col), std::min(fraction, 1.0));
      }
    }
  }
  return make_selection(std::move(scored), SelectionOrigin::ground_truth_boxes);
}

}  // namespace textground
