#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcifem/geometry.hpp"
#include "fcifem/mapping.hpp"
#include "fcifem/spline1d.hpp"

namespace fcifem {

/// One plane zeta_k whose basis functions can be nonzero at a given zeta.
/// `s` is the unwrapped plane coordinate (within one spacing-window of the
/// evaluation point), `k` the wrapped plane index.
struct PlaneImage {
  int k = 0;
  double s = 0.0;
  double weight = 0.0;
  double weight_deriv = 0.0;
};

/// Value and Cartesian (R, Z, zeta) gradient of one basis function at a point.
/// Several terms may refer to the same dof (periodic images with few planes).
struct BasisTerm {
  int dof = 0;
  double value = 0.0;
  Vec3 grad{0.0, 0.0, 0.0};
};

/// Merges terms with equal dof (summing values and gradients) and sorts by dof.
void merge_terms(std::vector<BasisTerm>& terms);

class CoefficientVector {
 public:
  explicit CoefficientVector(int dof_count, double fill = 0.0) : values_(dof_count, fill) {}
  explicit CoefficientVector(std::vector<double> values);

  int size() const { return static_cast<int>(values_.size()); }
  double& operator[](int i) { return values_[i]; }
  double operator[](int i) const { return values_[i]; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  bool all_finite() const;

 private:
  std::vector<double> values_;
};

/// Common interface of the discrete spaces used by assembly.
class DiscreteSpace {
 public:
  virtual ~DiscreteSpace() = default;

  /// Number of unknowns.
  virtual int dof_count() const = 0;

  /// Basis terms at x given the plane images of x.zeta and the mapping jets
  /// Q(x, image.s) for each image (same order). Terms use unknown numbering.
  virtual void point_terms(const Point3& x, std::span<const PlaneImage> images, std::span<const MapJet> jets,
                           std::vector<BasisTerm>& out) const = 0;

  /// Convenience wrapper computing the jets with the space's mapping.
  void basis_at(const Point3& x, std::vector<BasisTerm>& out) const;

  virtual const class FcifemSpace& fcifem() const = 0;
};

/// The FCIFEM space: tensor B-splines on the planes zeta_k whose (R, Z)
/// arguments are taken at the mapped point Q(x, zeta_k).
///
/// The R axis is optional; without it the space lives in (Z, zeta) and the R
/// coordinate of points is ignored. Dofs are numbered (k * n_z + j) * n_r + i.
class FcifemSpace final : public DiscreteSpace {
 public:
  FcifemSpace(std::optional<Spline1D> r_axis, Spline1D z_axis, Spline1D zeta_axis,
              std::shared_ptr<const Mapping> mapping);

  bool has_r() const { return r_axis_.has_value(); }
  const Spline1D& r_axis() const;
  const Spline1D& z_axis() const { return z_axis_; }
  const Spline1D& zeta_axis() const { return zeta_axis_; }
  const Mapping& mapping() const { return *mapping_; }
  std::shared_ptr<const Mapping> mapping_ptr() const { return mapping_; }

  int n_r() const { return r_axis_ ? r_axis_->n_nodes() : 1; }
  int n_z() const { return z_axis_.n_nodes(); }
  int n_zeta() const { return zeta_axis_.n_nodes(); }
  int dof_count() const override { return n_r() * n_z() * n_zeta(); }
  int dof(int i, int j, int k) const { return (k * n_z() + j) * n_r() + i; }
  std::array<int, 3> node_of(int dof) const;
  Point3 node_position(int dof) const;

  /// Domain of the (R, Z) axes; R spans [0, 0] without an R axis.
  Box2 plane_box() const;
  /// True when x lies inside every clamped axis.
  bool contains(const Point3& x) const;

  /// Planes whose zeta basis functions are nonzero at `zeta`.
  int plane_images(double zeta, std::array<PlaneImage, 3>& out) const;

  void point_terms(const Point3& x, std::span<const PlaneImage> images, std::span<const MapJet> jets,
                   std::vector<BasisTerm>& out) const override;
  const FcifemSpace& fcifem() const override { return *this; }

  double evaluate(const CoefficientVector& c, const Point3& x) const;
  Vec3 evaluate_gradient(const CoefficientVector& c, const Point3& x) const;
  CoefficientVector interpolate_nodal(const std::function<double(const Point3&)>& f) const;

 private:
  void check_point(const Point3& x) const;

  std::optional<Spline1D> r_axis_;
  Spline1D z_axis_;
  Spline1D zeta_axis_;
  std::shared_ptr<const Mapping> mapping_;
};

/// FCIFEM space blended with a first-order FEM layer on the same nodes:
/// psi = (1 - B) psi_fci + B K, with K the trilinear hat (bilinear in R, Z
/// times the linear periodic hat in zeta) and B the sum of the (R, Z) hats of
/// boundary nodes, B = 1 - (1 - b_R)(1 - b_Z). The FEM nodal value at an
/// interior node is the value of the plane's FCIFEM function at that node; at
/// boundary nodes it is zero, which imposes phi = 0 on the (R, Z) boundary
/// exactly. The unknowns are the FCIFEM coefficients, boundary ones included.
class BlendedSpace final : public DiscreteSpace {
 public:
  explicit BlendedSpace(FcifemSpace fcifem);

  int dof_count() const override { return fcifem_.dof_count(); }
  const FcifemSpace& fcifem() const override { return fcifem_; }

  bool is_boundary_node(int i, int j) const;

  struct Ramp {
    double value = 0.0;
    double d_dr = 0.0;
    double d_dz = 0.0;
  };
  Ramp ramp(double r, double z) const;

  void point_terms(const Point3& x, std::span<const PlaneImage> images, std::span<const MapJet> jets,
                   std::vector<BasisTerm>& out) const override;

  double evaluate(const CoefficientVector& c, const Point3& x) const;
  Vec3 evaluate_gradient(const CoefficientVector& c, const Point3& x) const;

 private:
  // Spline functions nonzero at each node with their values there, so that a
  // boundary-FEM nodal value is the plane function's value at the node.
  struct NodeSample {
    int count = 0;
    std::array<int, 3> index{};
    std::array<double, 3> value{};
  };
  static std::vector<NodeSample> node_samples(const Spline1D& axis);

  FcifemSpace fcifem_;
  std::vector<NodeSample> at_node_r_;
  std::vector<NodeSample> at_node_z_;
  Spline1D hat_r_;
  Spline1D hat_z_;
  Spline1D hat_zeta_;
};

/// Regular sample grid for field export: `oversample` points per node spacing
/// along every axis, covering the space's domain (one period along periodic axes).
struct SampleGrid {
  std::array<double, 3> lower{};
  std::array<double, 3> step{};
  std::array<int, 3> shape{1, 1, 1};
  /// Points are clamped to this corner so rounding never leaves a clamped axis.
  std::array<double, 3> upper{};

  Point3 point(int a, int b, int c) const {
    return {std::min(lower[0] + a * step[0], upper[0]), std::min(lower[1] + b * step[1], upper[1]),
            std::min(lower[2] + c * step[2], upper[2])};
  }
  static SampleGrid for_space(const FcifemSpace& space, int oversample, bool single_zeta_plane = false);
};

/// Writes samples on `grid` as CSV: a small '#' header with axis ranges and
/// shape, a column header, then one row per point (R fastest, zeta slowest).
void write_field_csv(const std::string& path, const SampleGrid& grid,
                     const std::function<double(const Point3&)>& field);

}  // namespace fcifem
