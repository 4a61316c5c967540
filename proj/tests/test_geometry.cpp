#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "support/fixtures.hpp"
#include "textground/error.hpp"
#include "textground/geometry.hpp"

using namespace textground;

namespace {

double rect_overlap(double ax0, double ay0, double ax1, double ay1, double bx0, double by0, double bx1, double by1) {
  const double w = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double h = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  return w * h;
}

// Point-in-convex-quad by consistent edge orientation.
bool inside(const Quad& q, double x, double y) {
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const auto& a = q.pts[i];
    const auto& b = q.pts[(i + 1) % 4];
    const double cross = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
    const int s = cross > 0 ? 1 : (cross < 0 ? -1 : 0);
    if (s == 0) continue;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

// Midpoint sampling of the union over a cell, n x n samples.
double sampled_union_fraction(const std::vector<Quad>& quads, double x0, double y0, double x1, double y1, int n) {
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = x0 + (i + 0.5) * (x1 - x0) / n;
      const double y = y0 + (j + 0.5) * (y1 - y0) / n;
      if (std::any_of(quads.begin(), quads.end(), [&](const Quad& q) { return inside(q, x, y); })) ++hits;
    }
  }
  return static_cast<double>(hits) / (n * n);
}

}  // namespace

TEST_CASE("box exactly covering one patch selects that token") {
  const auto layout = make_layout(4, 4, 16, 1);
  const auto s = boxes_to_tokens({Quad::axis_aligned(0, 0, 16, 16)}, layout);
  CHECK(s.indices == std::vector<std::size_t>{0});
  CHECK(s.scores == std::vector<double>{1.0});
  CHECK(s.origin == SelectionOrigin::ground_truth_boxes);
}

TEST_CASE("box covering the full image selects every token") {
  const auto layout = make_layout(4, 4, 16, 1);
  const auto s = boxes_to_tokens({Quad::axis_aligned(0, 0, 64, 64)}, layout);
  CHECK(s.size() == 16);
  std::vector<std::size_t> sorted = s.indices;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 16; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("60/60/30 percent fixture keeps the two majority-covered patches") {
  // Row 1 of a 4x4 grid: patches 5, 6, 7 span x in [16, 64), y in [16, 32).
  // Height 9.6 of 16 gives 0.6 on fully spanned patches; x ends at 56, so
  // patch 7 gets half its width: 0.5 * 0.6 = 0.3.
  const auto layout = make_layout(4, 4, 16, 1);
  const auto box = Quad::axis_aligned(16, 16, 56, 25.6);
  for (std::size_t t : {5u, 6u, 7u}) {
    const double x0 = 16.0 * (t % 4), y0 = 16.0 * (t / 4);
    const double expected = t == 7 ? 0.3 : 0.6;
    CHECK(rect_overlap(16, 16, 56, 25.6, x0, y0, x0 + 16, y0 + 16) / 256.0 == doctest::Approx(expected));
  }
  const auto s = boxes_to_tokens({box}, layout);
  CHECK(s.indices == std::vector<std::size_t>{5, 6});
  CHECK(s.scores[0] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("exactly half coverage is included") {
  const auto layout = make_layout(2, 1, 16, 1);
  const auto s = boxes_to_tokens({Quad::axis_aligned(8, 0, 24, 16)}, layout);
  CHECK(s.indices == std::vector<std::size_t>{0, 1});
}

TEST_CASE("empty and degenerate boxes") {
  const auto layout = make_layout(3, 3, 10, 1);
  CHECK(boxes_to_tokens({}, layout).empty());
  CHECK(boxes_to_tokens({Quad::axis_aligned(5, 5, 5, 25)}, layout).empty());
  Quad collinear{{Point{0, 0}, Point{10, 10}, Point{20, 20}, Point{5, 5}}};
  CHECK(boxes_to_tokens({collinear}, layout).empty());
}

TEST_CASE("vertices outside the image are rejected") {
  const auto layout = make_layout(2, 2, 16, 1);
  CHECK_THROWS_AS(boxes_to_tokens({Quad::axis_aligned(-1, 0, 10, 10)}, layout), ValidationError);
  CHECK_THROWS_AS(boxes_to_tokens({Quad::axis_aligned(0, 0, 33, 10)}, layout), ValidationError);
}

TEST_CASE("union does not double count overlapping boxes") {
  const auto layout = make_layout(4, 4, 16, 1);
  // Each box alone covers 40% of patch 0; together they cover 60%.
  const auto a = Quad::axis_aligned(0, 0, 16, 6.4);
  const auto b = Quad::axis_aligned(0, 3.2, 16, 9.6);
  CHECK(boxes_to_tokens({a}, layout).empty());
  CHECK(boxes_to_tokens({a, a}, layout).empty());
  const auto s = boxes_to_tokens({a, b}, layout);
  REQUIRE(s.size() == 1);
  CHECK(s.scores[0] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("axis-aligned union area matches the analytic rectangle overlap") {
  fixtures::Rng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const double x0 = fixtures::uniform(rng, 0, 60), x1 = fixtures::uniform(rng, x0, 64);
    const double y0 = fixtures::uniform(rng, 0, 60), y1 = fixtures::uniform(rng, y0, 64);
    const double cx = fixtures::uniform(rng, 0, 48), cy = fixtures::uniform(rng, 0, 48);
    const double got = union_area_in_rect({Quad::axis_aligned(x0, y0, x1, y1)}, cx, cy, cx + 16, cy + 16);
    CHECK(got == doctest::Approx(rect_overlap(x0, y0, x1, y1, cx, cy, cx + 16, cy + 16)).epsilon(1e-9));
  }
}

TEST_CASE("rotated quads agree with a sampling oracle") {
  fixtures::Rng rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<Quad> quads;
    const int n = static_cast<int>(fixtures::pick(rng, 1, 3));
    for (int i = 0; i < n; ++i) {
      // Corners stay within 14 * sqrt(2) of a center in [22, 42], so inside the image.
      const double cx = fixtures::uniform(rng, 22, 42), cy = fixtures::uniform(rng, 22, 42);
      const double hw = fixtures::uniform(rng, 2, 14), hh = fixtures::uniform(rng, 2, 14);
      const double a = fixtures::uniform(rng, 0, 3.14159);
      const double c = std::cos(a), s = std::sin(a);
      Quad q;
      const double corners[4][2] = {{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}};
      for (int k = 0; k < 4; ++k) {
        q.pts[k] = {cx + c * corners[k][0] - s * corners[k][1], cy + s * corners[k][0] + c * corners[k][1]};
      }
      quads.push_back(q);
    }
    const double x0 = fixtures::uniform(rng, 8, 40), y0 = fixtures::uniform(rng, 8, 40);
    const double exact = union_area_in_rect(quads, x0, y0, x0 + 16, y0 + 16) / 256.0;
    CHECK(exact == doctest::Approx(sampled_union_fraction(quads, x0, y0, x0 + 16, y0 + 16, 400)).epsilon(0.01));
  }
}

TEST_CASE("enlarging a box never removes tokens") {
  fixtures::Rng rng(4);
  const auto layout = make_layout(5, 4, 12, 1);
  for (int trial = 0; trial < 300; ++trial) {
    const double x0 = fixtures::uniform(rng, 0, 50), x1 = fixtures::uniform(rng, x0, 60);
    const double y0 = fixtures::uniform(rng, 0, 40), y1 = fixtures::uniform(rng, y0, 48);
    const auto small = boxes_to_tokens({Quad::axis_aligned(x0, y0, x1, y1)}, layout);
    const auto big = boxes_to_tokens({Quad::axis_aligned(fixtures::uniform(rng, 0, x0), fixtures::uniform(rng, 0, y0),
                                                         fixtures::uniform(rng, x1, 60), fixtures::uniform(rng, y1, 48))},
                                     layout);
    for (auto t : small.indices) CHECK(big.contains(t));
    std::set<std::size_t> unique(big.indices.begin(), big.indices.end());
    CHECK(unique.size() == big.size());
    for (auto t : big.indices) CHECK(layout.image_token_range.contains(t));
  }
}
