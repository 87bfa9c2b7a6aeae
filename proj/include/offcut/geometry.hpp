#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace offcut {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
  double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }

  friend Vec3 operator+(Vec3 a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

using Polygon = std::vector<Vec2>;

/// Axis-aligned box in world space (mm).
struct Box3 {
  Vec3 min;
  Vec3 max;

  Vec3 size() const { return max - min; }
  double volume() const {
    const Vec3 s = size();
    return s.x * s.y * s.z;
  }
};

/// Signed area, positive for counter-clockwise polygons.
double signed_area(const Polygon& poly);

/// Even-odd point in polygon test.
bool point_in_polygon(const Polygon& poly, Vec2 p);

/// Length of the overlap of [a0,a1] and [b0,b1]; 0 when disjoint.
inline double interval_overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

/// Volume of the intersection of two boxes.
double overlap_volume(const Box3& a, const Box3& b);

}  // namespace offcut
