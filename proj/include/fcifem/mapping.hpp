#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcifem/field.hpp"
#include "fcifem/geometry.hpp"
#include "fcifem/spline1d.hpp"

namespace fcifem {

/// Mapped point Q(x, s) restricted to (R, Z) together with its derivatives
/// with respect to the source point x = (R, Z, zeta).
struct MapJet {
  double r = 0.0;
  double z = 0.0;
  Vec3 dr{1.0, 0.0, 0.0};
  Vec3 dz{0.0, 1.0, 0.0};
  /// False when the field line left the mapping's bounding box.
  bool valid = true;
};

struct MappedPoint {
  double r = 0.0;
  double z = 0.0;
  bool in_domain = true;
};

/// The projection Q(x, s) of a point along (approximate) field lines onto the
/// plane zeta = s. Q(x, s)_zeta = s holds by construction, so only the (R, Z)
/// components are returned.
class Mapping {
 public:
  explicit Mapping(std::optional<Box2> domain = std::nullopt) : domain_(domain) {}
  virtual ~Mapping() = default;

  virtual std::string kind() const = 0;

  /// Q(x, s) and dQ/dx.
  virtual MapJet jet(const Point3& x, double s) const = 0;

  /// Q(x, s); `in_domain` reports whether the image lies in the solve domain.
  virtual MappedPoint map(const Point3& x, double s) const;

  /// Jets for a column of source points sharing (r, z): out[i] = jet({r, z, zetas[i]}, targets[i]).
  virtual void map_column(double r, double z, std::span<const double> zetas, std::span<const double> targets,
                          std::span<MapJet> out) const;

  const std::optional<Box2>& domain() const { return domain_; }

 private:
  std::optional<Box2> domain_;
};

/// Closed-form map of a straight field: Q = (R, Z + (B_Z/B_zeta)(s - zeta)).
class AnalyticStraightMapping final : public Mapping {
 public:
  explicit AnalyticStraightMapping(const FieldModel& field, std::optional<Box2> domain = std::nullopt);
  std::string kind() const override { return "analytic_straight"; }
  MapJet jet(const Point3& x, double s) const override;

  double slope() const { return slope_; }

 private:
  double slope_;
};

/// The identity map Q(x, s) = (R, Z): reduces the representation to tensor splines.
class IdentityMapping final : public Mapping {
 public:
  using Mapping::Mapping;
  std::string kind() const override { return "identity"; }
  MapJet jet(const Point3& x, double s) const override;
};

struct TraceResult {
  Point2 end;
  /// Trajectory left the bounding box; `end` is clamped onto the box.
  bool exited = false;
  double exit_zeta = 0.0;
  /// Trajectory stayed inside the solve domain over the whole interval.
  bool stayed_in_domain = true;
};

/// Fixed RK4 step keeping the field-line error below `tol` per unit zeta for
/// the analytic fields in this library.
double rk4_step_for_tolerance(double tol);

/// Integrates dR/dzeta = B_R/B_zeta, dZ/dzeta = B_Z/B_zeta from `start` to
/// zeta_end with classical RK4. `box` bounds the trajectory; `domain` is only
/// used to fill TraceResult::stayed_in_domain.
TraceResult trace_field_line(const FieldModel& field, const Point3& start, double zeta_end, double tol,
                             std::optional<Box2> box = std::nullopt, std::optional<Box2> domain = std::nullopt);

/// Mapping obtained by integrating field lines. Jacobians come from the
/// tangent (variational) equations integrated along the same RK4 steps.
/// Trajectories are confined to the solve domain grown by 20%; leaving it
/// marks the result invalid.
class ExactOdeMapping final : public Mapping {
 public:
  ExactOdeMapping(const FieldModel& field, std::optional<Box2> domain, double tol = 1e-10);
  std::string kind() const override { return "exact_ode"; }

  MapJet jet(const Point3& x, double s) const override;
  MappedPoint map(const Point3& x, double s) const override;
  void map_column(double r, double z, std::span<const double> zetas, std::span<const double> targets,
                  std::span<MapJet> out) const override;

  TraceResult trace(const Point3& x, double s) const;

  const FieldModel& field() const { return field_; }
  double step() const { return step_; }
  double tolerance() const { return tol_; }
  const std::optional<Box2>& box() const { return box_; }

 private:
  FieldModel field_;
  double tol_;
  double step_;
  std::optional<Box2> box_;
};

/// Interpolating tensor-product spline on an (R, Z) node grid.
class TensorSpline2D {
 public:
  /// Coefficients chosen so the spline reproduces `nodal` (row-major,
  /// index j * nr + i) at every node.
  TensorSpline2D(Spline1D r_axis, Spline1D z_axis, std::span<const double> nodal);

  struct Value {
    double f = 0.0;
    double df_dr = 0.0;
    double df_dz = 0.0;
  };
  Value eval(double r, double z) const;

  const Spline1D& r_axis() const { return r_axis_; }
  const Spline1D& z_axis() const { return z_axis_; }
  const std::vector<double>& coefficients() const { return coef_; }

 private:
  Spline1D r_axis_;
  Spline1D z_axis_;
  std::vector<double> coef_;
};

/// Taylor expansion Q(x, s) = (R, Z) + c1 (s - zeta) + c2 (s - zeta)^2 with the
/// coefficient fields stored as interpolating splines on the (R, Z) node grid.
/// Points outside the grid are clamped onto it before the coefficients are
/// evaluated.
class TaylorSplineMapping final : public Mapping {
 public:
  TaylorSplineMapping(TensorSpline2D c1r, TensorSpline2D c1z, std::optional<TensorSpline2D> c2r,
                      std::optional<TensorSpline2D> c2z, std::optional<Box2> domain);
  std::string kind() const override { return "taylor_spline"; }

  MapJet jet(const Point3& x, double s) const override;
  void map_column(double r, double z, std::span<const double> zetas, std::span<const double> targets,
                  std::span<MapJet> out) const override;

  int taylor_order() const { return c2r_ ? 2 : 1; }
  const TensorSpline2D& linear_r() const { return c1r_; }
  const TensorSpline2D& linear_z() const { return c1z_; }
  const TensorSpline2D* quadratic_r() const { return c2r_ ? &*c2r_ : nullptr; }
  const TensorSpline2D* quadratic_z() const { return c2z_ ? &*c2z_ : nullptr; }

 private:
  struct Coefficients {
    TensorSpline2D::Value c1r, c1z, c2r, c2z;
  };
  Coefficients coefficients(double r, double z) const;
  static MapJet expand(double r, double z, const Coefficients& c, double delta);

  TensorSpline2D c1r_;
  TensorSpline2D c1z_;
  std::optional<TensorSpline2D> c2r_;
  std::optional<TensorSpline2D> c2z_;
};

/// Taylor coefficients are the exact zeta-derivatives of the field-line map at
/// each node: c1 = v, c2 = (grad v) v / 2 with v = (B_R, B_Z) / B_zeta.
TaylorSplineMapping build_taylor_mapping(const FieldModel& field, const Spline1D& r_grid, const Spline1D& z_grid,
                                         int taylor_order = 2, std::optional<Box2> domain = std::nullopt);

struct SeedError {
  Point3 seed;
  Point2 exact;
  Point2 approx;
  double error = 0.0;
  bool survived = false;
};

struct MappingErrorReport {
  double rms = 0.0;
  double max = 0.0;
  int survivors = 0;
  std::vector<SeedError> per_seed;
};

/// Final-position error |Q_approx - Q_exact| at zeta_end for every seed whose
/// exact field line stays inside the exact mapping's domain. Throws
/// std::runtime_error when no seed survives.
MappingErrorReport mapping_error_report(const Mapping& approx, const ExactOdeMapping& exact,
                                        std::span<const Point3> seeds, double zeta_end);

}  // namespace fcifem
