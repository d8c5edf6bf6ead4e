#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "geocast/geometry.hpp"
#include "geocast/random.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace geocast;

namespace {

// Brute-force minimum enclosing circle: try every pair diameter and every
// triple circumcircle, keep the smallest that contains all points. O(n^3)
// candidates, O(n) containment check each. Independent of the library code.
Circle bf_circle_two(const Point& a, const Point& b) {
  Point c{(a.x + b.x) / 2.0, (a.y + b.y) / 2.0};
  return Circle{c, distance(a, b) / 2.0};
}

bool bf_circumcircle(const Point& a, const Point& b, const Point& c, Circle& out) {
  double ax = b.x - a.x, ay = b.y - a.y;
  double bx = c.x - a.x, by = c.y - a.y;
  double d = 2.0 * (ax * by - ay * bx);
  if (std::abs(d) < 1e-12) return false;
  double a2 = ax * ax + ay * ay;
  double b2 = bx * bx + by * by;
  double ux = (by * a2 - ay * b2) / d;
  double uy = (ax * b2 - bx * a2) / d;
  out.center = Point{a.x + ux, a.y + uy};
  out.radius = std::hypot(ux, uy);
  return true;
}

bool bf_contains_all(const Circle& c, const std::vector<Point>& pts) {
  for (const auto& p : pts)
    if (distance(c.center, p) > c.radius + 1e-9) return false;
  return true;
}

Circle bf_mec(const std::vector<Point>& pts) {
  if (pts.size() == 1) return Circle{pts[0], 0.0};
  Circle best{Point{0, 0}, std::numeric_limits<double>::infinity()};
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j) {
      Circle c = bf_circle_two(pts[i], pts[j]);
      if (c.radius < best.radius && bf_contains_all(c, pts)) best = c;
      for (size_t k = j + 1; k < pts.size(); ++k) {
        Circle cc;
        if (bf_circumcircle(pts[i], pts[j], pts[k], cc) && cc.radius < best.radius &&
            bf_contains_all(cc, pts))
          best = cc;
      }
    }
  return best;
}

}  // namespace

TEST_CASE("distance basics") {
  CHECK(distance(Point{0, 0}, Point{3, 4}) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(distance(Point{1, 2}, Point{4, 6}) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(distance(Point{-1, -1}, Point{-1, -1}) == 0.0);
}

TEST_CASE("distance properties: symmetry, triangle inequality, translation") {
  RandomStream rng(41);
  for (int i = 0; i < 200; ++i) {
    Point a{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    Point b{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    Point c{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    CHECK(distance(a, b) == doctest::Approx(distance(b, a)).epsilon(1e-15));
    CHECK(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
    double dx = rng.uniform(-50, 50), dy = rng.uniform(-50, 50);
    Point at{a.x + dx, a.y + dy}, bt{b.x + dx, b.y + dy};
    CHECK(distance(at, bt) == doctest::Approx(distance(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("rect helpers") {
  Rect r{0, 0, 4, 2};
  CHECK(r.width() == 4.0);
  CHECK(r.height() == 2.0);
  CHECK(r.area() == 8.0);
  CHECK(r.center().x == 2.0);
  CHECK(r.center().y == 1.0);
  CHECK(r.contains(Point{0, 0}));
  CHECK(r.contains(Point{4, 2}));
  CHECK_FALSE(r.contains(Point{4.0001, 1}));
  CHECK(r.distance_to(Point{2, 1}) == 0.0);
  CHECK(r.distance_to(Point{5, 3}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(r.distance_to(Point{2, 5}) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(r.distance_to(Point{-3, 1}) == doctest::Approx(3.0).epsilon(1e-15));
  auto cs = r.corners();
  REQUIRE(cs.size() == 4);
}

TEST_CASE("corner_mean_distance frozen values") {
  Rect unit{0, 0, 1, 1};
  // From the center every corner is at sqrt(2)/2.
  CHECK(corner_mean_distance(unit, Point{0.5, 0.5}) ==
        doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-15));
  // From a corner: 0, 1, 1, sqrt(2); mean = (2 + sqrt(2)) / 4.
  CHECK(corner_mean_distance(unit, Point{0, 0}) ==
        doctest::Approx(0.8535533905932737).epsilon(1e-15));
  // Mean over corners is an upper bound for distance to the center.
  RandomStream rng(7);
  for (int i = 0; i < 100; ++i) {
    Point p{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    CHECK(corner_mean_distance(unit, p) >= distance(unit.center(), p) - 1e-12);
  }
}

TEST_CASE("rects_overlap requires positive-area intersection") {
  Rect a{0, 0, 1, 1};
  CHECK(rects_overlap(a, Rect{0.5, 0.5, 2, 2}));
  CHECK_FALSE(rects_overlap(a, Rect{1, 0, 2, 1}));    // share an edge only
  CHECK_FALSE(rects_overlap(a, Rect{1, 1, 2, 2}));    // share a corner only
  CHECK_FALSE(rects_overlap(a, Rect{3, 3, 4, 4}));
  CHECK(rects_overlap(a, a));
}

TEST_CASE("cells_adjacent: shared boundary segment of positive length") {
  Rect a{0, 0, 1, 1};
  CHECK(cells_adjacent(a, Rect{1, 0, 2, 1}));          // full shared edge
  CHECK(cells_adjacent(a, Rect{1, 0.5, 2, 3}));        // partial shared edge
  CHECK(cells_adjacent(a, Rect{0, 1, 1, 2}));          // shared top edge
  CHECK_FALSE(cells_adjacent(a, Rect{1, 1, 2, 2}));    // corner touch only
  CHECK_FALSE(cells_adjacent(a, Rect{1.5, 0, 2, 1}));  // gap
  CHECK_FALSE(cells_adjacent(a, a));                   // same cell, no boundary
  CHECK_FALSE(cells_adjacent(a, Rect{0.25, 0.25, 0.75, 0.75}));  // nested
}

TEST_CASE("min_enclosing_circle small cases") {
  std::vector<Point> empty;
  CHECK_THROWS_AS(min_enclosing_circle(empty), std::invalid_argument);

  std::vector<Point> single{{3, 4}};
  auto one = min_enclosing_circle(single);
  CHECK(one.radius == 0.0);
  CHECK(one.center.x == 3.0);

  std::vector<Point> pair{{0, 0}, {2, 0}};
  auto two = min_enclosing_circle(pair);
  CHECK(two.center.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(two.center.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(two.radius == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<Point> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  auto sq = min_enclosing_circle(square);
  CHECK(sq.center.x == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(sq.center.y == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(sq.radius == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));

  std::vector<Point> collinear{{0, 0}, {1, 0}, {2, 0}};
  auto col = min_enclosing_circle(collinear);
  CHECK(col.center.x == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(col.radius == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("min_enclosing_circle matches brute force on random sets") {
  RandomStream rng(1234);
  for (int trial = 0; trial < 30; ++trial) {
    size_t n = 2 + rng.uniform_index(30);
    std::vector<Point> pts;
    pts.reserve(n);
    for (size_t i = 0; i < n; ++i)
      pts.push_back(Point{rng.uniform(0, 1000), rng.uniform(0, 1000)});
    Circle got = min_enclosing_circle(pts);
    Circle want = bf_mec(pts);
    CHECK(got.radius == doctest::Approx(want.radius).epsilon(1e-9));
    for (const auto& p : pts) CHECK(distance(got.center, p) <= got.radius + 1e-9);
  }
}

TEST_CASE("min_enclosing_circle handles duplicates and collinear clusters") {
  std::vector<Point> pts{{5, 5}, {5, 5}, {5, 5}};
  auto c = min_enclosing_circle(pts);
  CHECK(c.radius == doctest::Approx(0.0));
  std::vector<Point> line;
  for (int i = 0; i <= 20; ++i) line.push_back(Point{double(i), 2.0 * i});
  auto cl = min_enclosing_circle(line);
  CHECK(cl.radius == doctest::Approx(std::hypot(10.0, 20.0)).epsilon(1e-9));
}

TEST_CASE("region_diameter frozen values") {
  std::vector<Rect> empty;
  CHECK_THROWS_AS(region_diameter(empty), std::invalid_argument);
  std::vector<Rect> unit{{0, 0, 1, 1}};
  CHECK(region_diameter(unit) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  // Two unit cells side by side: farthest corners (0,0)-(2,1).
  std::vector<Rect> domino{{0, 0, 1, 1}, {1, 0, 2, 1}};
  CHECK(region_diameter(domino) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("region_diameter monotone under adding cells") {
  RandomStream rng(99);
  std::vector<Rect> cells;
  double prev = 0.0;
  for (int i = 0; i < 40; ++i) {
    double x = rng.uniform(0, 50), y = rng.uniform(0, 50);
    cells.push_back(Rect{x, y, x + 1, y + 1});
    double d = region_diameter(cells);
    CHECK(d >= prev - 1e-12);
    prev = d;
  }
}
