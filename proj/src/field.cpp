#include "fcifem/field.hpp"

#include <stdexcept>

namespace fcifem {

FieldModel FieldModel::straight(double b_z, double b_zeta) {
  if (b_zeta == 0.0) throw std::invalid_argument("FieldModel: B_zeta must be nonzero");
  return FieldModel(FieldKind::straight, b_z, b_zeta);
}

FieldModel FieldModel::divertor(double b0) {
  if (b0 == 0.0) throw std::invalid_argument("FieldModel: B0 must be nonzero");
  return FieldModel(FieldKind::divertor, 0.0, b0);
}

Point2 FieldModel::flux_gradient(double r, double z) const {
  if (kind_ == FieldKind::straight) return {0.0, 1.0};
  return {2.0 * (r - 1.0), 3.0 * z * z - 1.0};
}

double FieldModel::flux(double r, double z) const {
  if (kind_ == FieldKind::straight) return z;
  return (r - 1.0) * (r - 1.0) + z * (z * z - 1.0);
}

Vec3 FieldModel::b(double r, double z) const {
  if (kind_ == FieldKind::straight) return {0.0, b_z_, b_zeta_};
  const Point2 g = flux_gradient(r, z);
  return {g.z, -g.r, b_zeta_};
}

FieldDirection FieldModel::direction(double r, double z) const {
  FieldDirection d;
  if (kind_ == FieldKind::straight) {
    d.vz = b_z_ / b_zeta_;
    return d;
  }
  const double inv = 1.0 / b_zeta_;
  d.vr = (3.0 * z * z - 1.0) * inv;
  d.vz = -2.0 * (r - 1.0) * inv;
  d.dvr_dz = 6.0 * z * inv;
  d.dvz_dr = -2.0 * inv;
  return d;
}

}  // namespace fcifem
