#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "ptap/error.hpp"
#include "ptap/network.hpp"

namespace ptap {

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }

}  // namespace ptap

namespace ptap::geo {

using ptap::Point;
using Polyline = std::vector<Point>;

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) { return norm(b - a); }

inline Point unit(Point a) {
  const double n = norm(a);
  return {a.x / n, a.y / n};
}

/// Normal pointing to the left of direction a (counterclockwise rotation).
inline Point left_normal(Point a) {
  const Point u = unit(a);
  return {-u.y, u.x};
}

inline Point rotate(Point a, double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}

inline double length(const Polyline& p) {
  double total = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) total += distance(p[i - 1], p[i]);
  return total;
}

inline Polyline reversed(Polyline p) {
  std::reverse(p.begin(), p.end());
  return p;
}

/// Shoelace area; positive for counterclockwise rings. The ring is implicitly
/// closed.
inline double signed_area(const Polyline& ring) {
  double a = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) a += cross(ring[i], ring[(i + 1) % ring.size()]);
  return 0.5 * a;
}

inline std::optional<Point> polygon_centroid(const Polyline& ring) {
  const double a = signed_area(ring);
  if (!(std::abs(a) > 0.0)) return std::nullopt;
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point p = ring[i], q = ring[(i + 1) % ring.size()];
    const double w = cross(p, q);
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  return Point{cx / (6.0 * a), cy / (6.0 * a)};
}

/// Splits a polyline at arc length s, 0 < s < length.
inline std::pair<Polyline, Polyline> split_at(const Polyline& p, double s) {
  Polyline head{p.front()}, tail;
  double walked = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    const double seg = distance(p[i - 1], p[i]);
    if (tail.empty() && walked + seg >= s) {
      const double t = seg > 0.0 ? (s - walked) / seg : 0.0;
      const Point cut = p[i - 1] + t * (p[i] - p[i - 1]);
      head.push_back(cut);
      tail.push_back(cut);
      if (t < 1.0) tail.push_back(p[i]);
    } else if (tail.empty()) {
      head.push_back(p[i]);
    } else {
      tail.push_back(p[i]);
    }
    walked += seg;
  }
  if (tail.size() < 2) tail.push_back(p.back());
  return {head, tail};
}

/// Clockwise angle from north in degrees, in [0, 360).
inline double azimuth_deg(Point from, Point to) {
  double a = std::atan2(to.x - from.x, to.y - from.y) * 180.0 / std::numbers::pi;
  if (a < 0.0) a += 360.0;
  if (a >= 360.0) a -= 360.0;
  return a;
}

namespace detail {

/// Miter vertex at p for incoming direction a and outgoing direction b,
/// offset distance d to the left.
inline Point miter(Point p, Point a, Point b, double d) {
  const Point n1 = left_normal(a), n2 = left_normal(b);
  const double denom = 1.0 + dot(n1, n2);
  if (denom < 1e-9) fail(ErrorCode::DegenerateOffset, "polyline folds back on itself");
  return p + (d / denom) * (n1 + n2);
}

}  // namespace detail

/// Left offset of `line` at distance d with miter joins. Optional end points
/// replace the plain perpendicular ends. No validity check.
inline Polyline offset_left_raw(const Polyline& line, double d, std::optional<Point> start = std::nullopt,
                                std::optional<Point> end = std::nullopt) {
  if (line.size() < 2) fail(ErrorCode::InvalidInput, "polyline needs at least two vertices");
  Polyline out;
  out.reserve(line.size());
  out.push_back(start ? *start : line.front() + d * left_normal(line[1] - line[0]));
  for (std::size_t i = 1; i + 1 < line.size(); ++i)
    out.push_back(detail::miter(line[i], line[i] - line[i - 1], line[i + 1] - line[i], d));
  const std::size_t n = line.size();
  out.push_back(end ? *end : line.back() + d * left_normal(line[n - 1] - line[n - 2]));
  return out;
}

/// Throws DegenerateOffset when an offset segment is empty or runs against
/// its centerline segment.
inline void check_offset(const Polyline& line, const Polyline& side) {
  for (std::size_t i = 1; i < line.size(); ++i) {
    const Point c = line[i] - line[i - 1];
    const Point o = side[i] - side[i - 1];
    if (!(dot(c, o) > 0.0) || !(norm(o) > 0.0))
      fail(ErrorCode::DegenerateOffset, "offset distance exceeds the local curvature radius");
  }
}

inline Polyline offset_left(const Polyline& line, double d, std::optional<Point> start = std::nullopt,
                            std::optional<Point> end = std::nullopt) {
  Polyline out = offset_left_raw(line, d, start, end);
  check_offset(line, out);
  return out;
}

/// Left and right parallels at distance d with miter joins.
inline std::pair<Polyline, Polyline> offset(const Polyline& line, double d) {
  if (!(d > 0.0)) fail(ErrorCode::InvalidInput, "offset distance must be positive");
  return {offset_left(line, d), reversed(offset_left(reversed(line), d))};
}

}  // namespace ptap::geo
