#pragma once

#include <cmath>

#include "fcifem/geometry.hpp"

namespace fcifem {

enum class FieldKind { straight, divertor };

/// Projected field-line direction (dR/dzeta, dZ/dzeta) = (B_R, B_Z) / B_zeta and
/// its (R, Z) Jacobian.
struct FieldDirection {
  double vr = 0.0;
  double vz = 0.0;
  double dvr_dr = 0.0;
  double dvr_dz = 0.0;
  double dvz_dr = 0.0;
  double dvz_dz = 0.0;
};

/// Analytic, zeta-independent magnetic field.
///
/// straight: B = B_Z Zhat + B_zeta zetahat.
/// divertor: B = B0 zetahat + zetahat x grad A with A = (R-1)^2 + Z(Z^2-1),
/// using the right-handed (R, zeta, Z) orientation, so B_R = dA/dZ and
/// B_Z = -dA/dR. The X-point is at (1, -1/sqrt(3)).
class FieldModel {
 public:
  static FieldModel straight(double b_z, double b_zeta);
  static FieldModel divertor(double b0);

  FieldKind kind() const { return kind_; }
  double b_z() const { return b_z_; }
  double b_zeta() const { return b_zeta_; }
  double b0() const { return b_zeta_; }

  /// (B_R, B_Z, B_zeta).
  Vec3 b(double r, double z) const;
  FieldDirection direction(double r, double z) const;

  /// Flux function A (divertor) or the straight-line invariant Z - (B_Z/B_zeta) zeta
  /// evaluated at zeta = 0 (straight).
  double flux(double r, double z) const;
  Point2 flux_gradient(double r, double z) const;

  static Point2 x_point() { return {1.0, -1.0 / std::sqrt(3.0)}; }

 private:
  FieldModel(FieldKind kind, double b_z, double b_zeta) : kind_(kind), b_z_(b_z), b_zeta_(b_zeta) {}

  FieldKind kind_;
  double b_z_;
  double b_zeta_;
};

}  // namespace fcifem
