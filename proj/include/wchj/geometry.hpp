#pragma once

#include <array>
#include <cmath>

namespace wchj {

/// A point or vector on the torus (or in its tangent space). Only the first
/// `dim` coordinates are meaningful; the remaining coordinate is kept at 0.
using Point = std::array<double, 2>;

inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm_squared(const Point& a) { return dot(a, a); }
inline double norm(const Point& a) { return std::sqrt(norm_squared(a)); }

inline Point operator+(const Point& a, const Point& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Point operator-(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1]}; }

inline bool is_finite(const Point& a) { return std::isfinite(a[0]) && std::isfinite(a[1]); }

}  // namespace wchj
