#include "geocast/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace geocast {

double Rect::distance_to(Point p) const {
  double dx = std::max({min_x - p.x, 0.0, p.x - max_x});
  double dy = std::max({min_y - p.y, 0.0, p.y - max_y});
  return std::hypot(dx, dy);
}

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double corner_mean_distance(const Rect& cell, Point p) {
  double sum = 0.0;
  for (Point c : cell.corners()) sum += distance(c, p);
  return 0.25 * sum;
}

bool rects_overlap(const Rect& a, const Rect& b) {
  return a.min_x < b.max_x - kGeomTol && b.min_x < a.max_x - kGeomTol &&
         a.min_y < b.max_y - kGeomTol && b.min_y < a.max_y - kGeomTol;
}

namespace {

// Overlap length of [a0,a1] and [b0,b1].
double interval_overlap(double a0, double a1, double b0, double b1) {
  return std::min(a1, b1) - std::max(a0, b0);
}

}  // namespace

bool cells_adjacent(const Rect& a, const Rect& b) {
  bool touch_x = std::abs(a.max_x - b.min_x) <= kGeomTol ||
                 std::abs(b.max_x - a.min_x) <= kGeomTol;
  bool touch_y = std::abs(a.max_y - b.min_y) <= kGeomTol ||
                 std::abs(b.max_y - a.min_y) <= kGeomTol;
  if (touch_x && interval_overlap(a.min_y, a.max_y, b.min_y, b.max_y) > kGeomTol)
    return true;
  if (touch_y && interval_overlap(a.min_x, a.max_x, b.min_x, b.max_x) > kGeomTol)
    return true;
  return false;
}

namespace {

bool in_circle(const Circle& c, Point p) {
  return distance(c.center, p) <= c.radius + kGeomTol;
}

Circle circle_from(Point a, Point b) {
  Point center{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
  return {center, 0.5 * distance(a, b)};
}

// Circumcircle of three points; degenerate (collinear) inputs fall back to
// the widest two-point circle.
Circle circle_from(Point a, Point b, Point c) {
  double bx = b.x - a.x, by = b.y - a.y;
  double cx = c.x - a.x, cy = c.y - a.y;
  double d = 2.0 * (bx * cy - by * cx);
  if (std::abs(d) < 1e-12) {
    Circle best = circle_from(a, b);
    for (const Circle& cand : {circle_from(a, c), circle_from(b, c)})
      if (cand.radius > best.radius) best = cand;
    return best;
  }
  double ux = (cy * (bx * bx + by * by) - by * (cx * cx + cy * cy)) / d;
  double uy = (bx * (cx * cx + cy * cy) - cx * (bx * bx + by * by)) / d;
  Point center{a.x + ux, a.y + uy};
  return {center, distance(center, a)};
}

Circle trivial_circle(std::span<const Point> r) {
  switch (r.size()) {
    case 0: return {{0.0, 0.0}, 0.0};
    case 1: return {r[0], 0.0};
    case 2: return circle_from(r[0], r[1]);
    default: return circle_from(r[0], r[1], r[2]);
  }
}

uint64_t smix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Circle min_enclosing_circle(std::span<const Point> points) {
  if (points.empty())
    throw std::invalid_argument("min_enclosing_circle: empty input");
  std::vector<Point> pts(points.begin(), points.end());
  // Deterministic shuffle; randomized order keeps Welzl's walk linear in
  // expectation regardless of input order.
  uint64_t state = 0x2545f4914f6cdd1dULL;
  for (size_t i = pts.size() - 1; i > 0; --i) {
    state = smix(state + i);
    std::swap(pts[i], pts[state % (i + 1)]);
  }

  // Iterative move-to-front variant of Welzl's algorithm.
  Circle c = trivial_circle({pts.data(), std::min<size_t>(1, pts.size())});
  for (size_t i = 1; i < pts.size(); ++i) {
    if (in_circle(c, pts[i])) continue;
    c = trivial_circle({&pts[i], 1});
    for (size_t j = 0; j < i; ++j) {
      if (in_circle(c, pts[j])) continue;
      c = circle_from(pts[i], pts[j]);
      for (size_t k = 0; k < j; ++k) {
        if (in_circle(c, pts[k])) continue;
        c = circle_from(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

namespace {

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew monotone chain; returns hull including collinear endpoints removed.
std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](Point a, Point b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() <= 2) return pts;
  std::vector<Point> hull(2 * pts.size());
  size_t k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  size_t lower = k + 1;
  for (size_t i = pts.size() - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

double region_diameter(std::span<const Rect> cells) {
  if (cells.empty())
    throw std::invalid_argument("region_diameter: empty input");
  std::vector<Point> pts;
  pts.reserve(cells.size() * 4);
  for (const Rect& r : cells)
    for (Point c : r.corners()) pts.push_back(c);
  std::vector<Point> hull = convex_hull(std::move(pts));
  double best = 0.0;
  for (size_t i = 0; i < hull.size(); ++i)
    for (size_t j = i + 1; j < hull.size(); ++j)
      best = std::max(best, distance(hull[i], hull[j]));
  return best;
}

}  // namespace geocast
