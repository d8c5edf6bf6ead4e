#pragma once

#include <array>
#include <span>
#include <vector>

namespace geocast {

// Absolute tolerance for geometric comparisons, in meters.
inline constexpr double kGeomTol = 1e-9;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Axis-aligned rectangle, min corner inclusive.
struct Rect {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  double area() const { return width() * height(); }
  Point center() const { return {0.5 * (min_x + max_x), 0.5 * (min_y + max_y)}; }
  std::array<Point, 4> corners() const {
    return {Point{min_x, min_y}, Point{max_x, min_y}, Point{max_x, max_y},
            Point{min_x, max_y}};
  }
  bool contains(Point p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  // Distance from p to the closest point of the rectangle (0 if inside).
  double distance_to(Point p) const;
};

struct Circle {
  Point center;
  double radius = 0.0;
};

double distance(Point a, Point b);

/// Mean of the distances from p to the four corners of cell.
double corner_mean_distance(const Rect& cell, Point p);

/// True iff the rectangles overlap with positive area.
bool rects_overlap(const Rect& a, const Rect& b);

/// Edge adjacency: a and b share a boundary segment of positive length.
/// Corner-only contact does not count.
bool cells_adjacent(const Rect& a, const Rect& b);

/// Smallest circle containing all points (randomized incremental, fixed
/// permutation seed so results are deterministic for a given input order).
/// Throws std::invalid_argument on empty input.
Circle min_enclosing_circle(std::span<const Point> points);

/// Maximum pairwise distance over all cell corner points.
/// Throws std::invalid_argument on empty input.
double region_diameter(std::span<const Rect> cells);

}  // namespace geocast
