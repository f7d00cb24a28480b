#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <tuple>

namespace topotrace {

// Image coordinates: x grows rightward, y downward, origin at the center of
// the top-left pixel.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend Pixel operator+(Pixel a, Pixel b) { return {a.x + b.x, a.y + b.y}; }
  friend Pixel operator-(Pixel a, Pixel b) { return {a.x - b.x, a.y - b.y}; }
};

// Row-major order: smaller y first, then smaller x. Used by every tie rule.
inline bool row_major_less(Pixel a, Pixel b) {
  return std::tie(a.y, a.x) < std::tie(b.y, b.x);
}

inline int round_half_away(double v) {
  return static_cast<int>(std::lround(v));
}

inline Pixel to_pixel(Point p) {
  return {round_half_away(p.x), round_half_away(p.y)};
}

inline Point to_point(Pixel p) {
  return {static_cast<double>(p.x), static_cast<double>(p.y)};
}

inline int chebyshev(Pixel a, Pixel b) {
  return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

inline double chebyshev(Point a, Point b) {
  return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

inline double distance(Point a, Point b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Distance from p to the closed segment [a, b]; `param` receives the
// projection parameter in [0, 1].
inline double point_segment_distance(Point p, Point a, Point b, double* param = nullptr) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  }
  if (param) *param = t;
  return distance(p, {a.x + t * dx, a.y + t * dy});
}

inline double segment_distance(Point a, Point b, Point c, Point d) {
  auto cross = [](Point o, Point p, Point q) {
    return (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x);
  };
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return 0.0;
  }
  return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d),
                   point_segment_distance(c, a, b), point_segment_distance(d, a, b)});
}

}  // namespace topotrace
