#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace drape {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

/// Folds an axial angle (orientation of an undirected line) into [0, pi).
inline double fold_axial(double theta) {
  double t = std::fmod(theta, kPi);
  if (t < 0.0) t += kPi;
  if (t >= kPi) t -= kPi;
  return t;
}

/// Shortest difference between two axial angles, in (-pi/2, pi/2].
inline double axial_difference(double to, double from) {
  double d = std::fmod(to - from, kPi);
  if (d <= -kPi / 2) d += kPi;
  if (d > kPi / 2) d -= kPi;
  return d;
}

inline Vec2 unit_at(double angle) { return {std::cos(angle), std::sin(angle)}; }

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Even-odd rule. Points exactly on an edge may land either side.
inline bool point_in_polygon(const Vec2& p, std::span<const Vec2> poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

inline double polygon_area(std::span<const Vec2> poly) {
  double s = 0.0;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) s += cross2(poly[j], poly[i]);
  return std::abs(s) / 2.0;
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

/// Parameter t >= 0 of the first crossing of ray origin + t*dir with the
/// polygon boundary, if any.
inline std::optional<double> ray_polygon_exit(const Vec2& origin, const Vec2& dir, std::span<const Vec2> poly) {
  std::optional<double> best;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 e = poly[i] - poly[j];
    const double denom = cross2(dir, e);
    if (std::abs(denom) < 1e-12) continue;
    const Vec2 w = poly[j] - origin;
    const double t = cross2(w, e) / denom;
    const double s = cross2(w, dir) / denom;
    if (t >= -1e-12 && s >= -1e-12 && s <= 1.0 + 1e-12) {
      const double tt = std::max(t, 0.0);
      if (!best || tt < *best) best = tt;
    }
  }
  return best;
}

struct NearestEdge {
  double distance = std::numeric_limits<double>::infinity();
  Vec2 edge_direction = Vec2::UnitX();
  Vec2 foot = Vec2::Zero();
};

inline NearestEdge nearest_edge(const Vec2& p, std::span<const Vec2> poly) {
  NearestEdge out;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[j];
    const Vec2& b = poly[i];
    const double d = point_segment_distance(p, a, b);
    if (d < out.distance) {
      out.distance = d;
      out.edge_direction = (b - a).normalized();
      const Vec2 ab = b - a;
      const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
      out.foot = a + t * ab;
    }
  }
  return out;
}

/// Axis-aligned rectangle centred at the origin, counter-clockwise.
inline std::vector<Vec2> centered_rectangle(double width, double height) {
  const double hw = width / 2.0, hh = height / 2.0;
  return {{hw, -hh}, {hw, hh}, {-hw, hh}, {-hw, -hh}};
}

}  // namespace drape

namespace drape {

/// Straight roller stroke: the swept footprint is the segment dilated by
/// half_width.
struct PathGeometry {
  Vec2 start = Vec2::Zero();
  Vec2 end = Vec2::UnitX();
  double half_width = 15.0;

  Vec2 direction() const { return (end - start).normalized(); }
  double length() const { return (end - start).norm(); }
  friend bool operator==(const PathGeometry& l, const PathGeometry& r) {
    return l.start == r.start && l.end == r.end && l.half_width == r.half_width;
  }
};

}  // namespace drape
