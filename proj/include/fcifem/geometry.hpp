#pragma once

#include <array>
#include <cmath>

namespace fcifem {

/// A point in the (R, Z) plane.
struct Point2 {
  double r = 0.0;
  double z = 0.0;
};

/// A point in (R, Z, zeta) space.
struct Point3 {
  double r = 0.0;
  double z = 0.0;
  double zeta = 0.0;
};

/// Cartesian components in (R, Z, zeta) order.
using Vec3 = std::array<double, 3>;

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a.r - b.r, a.z - b.z); }

/// Axis-aligned rectangle in (R, Z).
struct Box2 {
  double r_min = 0.0;
  double r_max = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;

  bool contains(double r, double z) const { return r >= r_min && r <= r_max && z >= z_min && z <= z_max; }
  bool contains(const Point2& p) const { return contains(p.r, p.z); }

  /// Box grown by `fraction` of its extent on every side.
  Box2 expanded(double fraction) const {
    const double dr = fraction * (r_max - r_min);
    const double dz = fraction * (z_max - z_min);
    return {r_min - dr, r_max + dr, z_min - dz, z_max + dz};
  }
};

}  // namespace fcifem
