#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace lexpand {

/// Reduces a real number to [0, 1).
inline double reduce(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

/// Arclength distance on R/Z; always in [0, 1/2].
inline double circle_distance(double x, double y) {
  double d = std::fabs(reduce(x) - reduce(y));
  return std::min(d, 1.0 - d);
}

/// A point of the circle, stored reduced mod 1.
struct CirclePoint {
  double value = 0.0;

  CirclePoint() = default;
  explicit CirclePoint(double v) : value(reduce(v)) {}

  friend double distance(CirclePoint a, CirclePoint b) { return circle_distance(a.value, b.value); }
};

/// Counter-clockwise arc [start, start + length] of the circle.
///
/// Interior means the open arc; the closed arc adds both endpoints. A full
/// circle chart is an arc of length 1 (its interior misses only `start`, so
/// callers use `full()` when that point matters).
struct Arc {
  double start = 0.0;
  double length = 0.0;

  Arc() = default;
  Arc(double s, double len) : start(reduce(s)), length(len) {}

  static Arc circle() { return Arc(0.0, 1.0); }
  /// Open ball of radius `radius` around `center`.
  static Arc ball(double center, double radius) { return Arc(center - radius, 2.0 * radius); }
  /// Arc between lifted endpoints lo <= hi.
  static Arc from_lift(double lo, double hi) { return Arc(lo, hi - lo); }

  bool full() const { return length >= 1.0; }
  double end() const { return start + length; }
  double midpoint() const { return reduce(start + 0.5 * length); }
  double radius() const { return 0.5 * length; }

  /// Offset of x from `start` in [0, 1).
  double offset(double x) const { return reduce(x - start); }

  bool contains_open(double x) const {
    if (full()) return true;
    double off = offset(x);
    return off > 0.0 && off < length;
  }

  bool contains_closed(double x, double tol = 0.0) const {
    if (full()) return true;
    double off = offset(x);
    return off <= length + tol || off >= 1.0 - tol;
  }

  /// Closed containment of another arc, with slack `tol` on both ends.
  bool contains(const Arc& other, double tol = 0.0) const {
    if (full()) return true;
    if (other.length > length + 2.0 * tol) return false;
    double off = offset(other.start);
    if (off > 1.0 - tol) off -= 1.0;
    return off >= -tol && off + other.length <= length + tol;
  }
};

/// True when the open arcs overlap by more than `tol`.
inline bool interiors_intersect(const Arc& a, const Arc& b, double tol = 0.0) {
  if (a.length <= tol || b.length <= tol) return false;
  if (a.full() || b.full()) return true;
  double off_b = a.offset(b.start);
  if (off_b < a.length - tol) return true;
  double off_a = b.offset(a.start);
  return off_a < b.length - tol;
}

/// Intersection of two arcs as at most two arcs (nonempty interiors only).
inline std::vector<Arc> intersect(const Arc& a, const Arc& b) {
  if (a.full()) return b.length > 0.0 ? std::vector<Arc>{b} : std::vector<Arc>{};
  if (b.full()) return a.length > 0.0 ? std::vector<Arc>{a} : std::vector<Arc>{};
  std::vector<Arc> out;
  double ob = a.offset(b.start);
  for (double shift : {0.0, -1.0}) {
    double lo = std::max(0.0, ob + shift);
    double hi = std::min(a.length, ob + shift + b.length);
    if (hi > lo) out.emplace_back(a.start + lo, hi - lo);
  }
  return out;
}

/// Uniform grid of `count` points in [0, 1).
inline std::vector<double> circle_grid(std::size_t count) {
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(count);
  return grid;
}

}  // namespace lexpand
