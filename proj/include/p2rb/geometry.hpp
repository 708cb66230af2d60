// SPDX-License-Identifier: Apache-2.0
//
// Box geometry shared by every other module.
//
// Coordinate convention: image coordinates, x to the right, y down, pixel
// (i, j) centered on the integer point (i, j). A box angle theta rotates the
// box's local +x axis by R(theta) = [[cos, -sin], [sin, cos]], so a positive
// angle turns +x toward +y (clockwise as displayed on screen).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "p2rb/error.hpp"

namespace p2rb {

inline constexpr double kPi = std::numbers::pi;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
inline bool operator==(Point2 a, Point2 b) { return a.x == b.x && a.y == b.y; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 p) { return std::hypot(p.x, p.y); }

/// Row-major 2x2 matrix [[a, b], [c, d]].
struct Mat2 {
  double a = 1.0, b = 0.0;
  double c = 0.0, d = 1.0;

  static Mat2 identity() { return {}; }
  static Mat2 diag(double x, double y) { return {x, 0.0, 0.0, y}; }

  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }
  Mat2 transposed() const { return {a, c, b, d}; }
};

inline Mat2 operator*(const Mat2& m, const Mat2& n) {
  return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
          m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
}
inline Point2 operator*(const Mat2& m, Point2 p) {
  return {m.a * p.x + m.b * p.y, m.c * p.x + m.d * p.y};
}
inline Mat2 operator*(double s, const Mat2& m) { return {s * m.a, s * m.b, s * m.c, s * m.d}; }

/// (cos, sin) with exact values at integer multiples of pi/2, so that
/// quarter-turn rotations permute coordinates without rounding.
inline std::pair<double, double> cos_sin(double theta) {
  const double q = std::round(theta / (kPi / 2.0));
  if (std::abs(theta - q * (kPi / 2.0)) <= 1e-15 * std::max(1.0, std::abs(theta))) {
    static constexpr double kC[4] = {1.0, 0.0, -1.0, 0.0};
    static constexpr double kS[4] = {0.0, 1.0, 0.0, -1.0};
    const int k = static_cast<int>(std::fmod(std::fmod(q, 4.0) + 4.0, 4.0));
    return {kC[k], kS[k]};
  }
  return {std::cos(theta), std::sin(theta)};
}

inline Mat2 rotation_matrix(double theta) {
  const auto [c, s] = cos_sin(theta);
  return {c, -s, s, c};
}

/// Oriented box: center, full width along the local x axis, full height
/// along the local y axis, rotation angle in radians.
struct RBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;
  double theta = 0.0;

  Point2 center() const { return {cx, cy}; }
  double area() const { return w * h; }
};

inline bool is_valid(const RBox& b) {
  return std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) &&
         std::isfinite(b.h) && std::isfinite(b.theta) && b.w > 0.0 && b.h > 0.0;
}

/// Wraps an angle into (-pi/2, pi/2].
inline double wrap_half_turn(double theta) {
  double t = std::fmod(theta + kPi / 2.0, kPi);
  if (t <= 0.0) t += kPi;
  return t - kPi / 2.0;
}

/// Signed difference a - b reduced modulo pi into [-pi/2, pi/2).
inline double angle_diff_mod_pi(double a, double b) {
  double d = std::fmod(a - b + kPi / 2.0, kPi);
  if (d < 0.0) d += kPi;
  return d - kPi / 2.0;
}

/// Canonical form: w >= h and theta in (-pi/2, pi/2]. Squares (w == h up to
/// a relative 1e-9) are further reduced to theta in (-pi/4, pi/4].
inline RBox canonicalize(RBox b) {
  if (b.w < b.h) {
    std::swap(b.w, b.h);
    b.theta += kPi / 2.0;
  }
  b.theta = wrap_half_turn(b.theta);
  if (b.w - b.h <= 1e-9 * b.w) {
    double t = std::fmod(b.theta + kPi / 4.0, kPi / 2.0);
    if (t <= 0.0) t += kPi / 2.0;
    b.theta = t - kPi / 4.0;
  }
  return b;
}

struct PolyQuad {
  std::array<Point2, 4> pts{};

  /// Shoelace area; positive for the winding produced by rbox_to_quad.
  double signed_area() const {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) s += cross(pts[i], pts[(i + 1) % 4]);
    return 0.5 * s;
  }
};

/// Corners in local order (-,-), (+,-), (+,+), (-,+).
inline PolyQuad rbox_to_quad(const RBox& b) {
  const Mat2 r = rotation_matrix(b.theta);
  const double hw = b.w / 2.0;
  const double hh = b.h / 2.0;
  const std::array<Point2, 4> local{{{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}};
  PolyQuad q;
  for (std::size_t i = 0; i < 4; ++i) q.pts[i] = b.center() + r * local[i];
  return q;
}

/// Fits a box to an (approximate) rectangle. Opposite edges are averaged so
/// slightly perturbed corners still yield a sensible box.
inline RBox quad_to_rbox(const PolyQuad& q) {
  const double area = std::abs(q.signed_area());
  if (!(area >= 1e-6)) throw Error(ErrorKind::DegenerateGeometry, "quad area below 1e-6 px^2");
  Point2 c{};
  for (const auto& p : q.pts) c = c + 0.25 * p;
  const Point2 e0 = 0.5 * ((q.pts[1] - q.pts[0]) + (q.pts[2] - q.pts[3]));
  const Point2 e1 = 0.5 * ((q.pts[2] - q.pts[1]) + (q.pts[3] - q.pts[0]));
  const double w = norm(e0);
  const double h = norm(e1);
  if (!(w > 0.0) || !(h > 0.0)) throw Error(ErrorKind::DegenerateGeometry, "zero-length quad edge");
  return canonicalize({c.x, c.y, w, h, std::atan2(e0.y, e0.x)});
}

using Polygon = std::vector<Point2>;

inline double polygon_area(const Polygon& poly) {
  if (poly.size() < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) s += cross(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * std::abs(s);
}

/// Sutherland-Hodgman: clips `subject` by the convex, positively wound `clip`.
inline Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  Polygon out = subject;
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Point2 a = clip[e];
    const Point2 b = clip[(e + 1) % clip.size()];
    const Point2 ab = b - a;
    Polygon in;
    in.swap(out);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Point2 p = in[i];
      const Point2 q = in[(i + 1) % in.size()];
      const double sp = cross(ab, p - a);
      const double sq = cross(ab, q - a);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + t * (q - p));
      }
    }
  }
  return out;
}

inline double intersection_area(const RBox& a, const RBox& b) {
  const double reach = 0.5 * (std::hypot(a.w, a.h) + std::hypot(b.w, b.h));
  if (norm(a.center() - b.center()) > reach) return 0.0;
  const PolyQuad qa = rbox_to_quad(a);
  const PolyQuad qb = rbox_to_quad(b);
  const Polygon pa(qa.pts.begin(), qa.pts.end());
  const Polygon pb(qb.pts.begin(), qb.pts.end());
  const double inter = polygon_area(clip_convex(pa, pb));
  return inter < 1e-9 ? 0.0 : inter;
}

inline double rotated_iou(const RBox& a, const RBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace p2rb
