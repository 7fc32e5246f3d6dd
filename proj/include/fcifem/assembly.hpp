#pragma once

#include <array>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "fcifem/representation.hpp"
#include "fcifem/sparse.hpp"

namespace fcifem {

/// Uniform cell-centred (midpoint) quadrature over the domain of a space,
/// `refinement` points per node spacing along each axis. Without an R axis
/// the R direction has one point of unit width, so weights are areas.
struct QuadratureGrid {
  std::array<int, 3> count{1, 1, 1};
  std::array<double, 3> lower{};
  std::array<double, 3> step{1.0, 1.0, 1.0};

  static QuadratureGrid for_space(const FcifemSpace& space, std::array<int, 3> refinement);
  static QuadratureGrid for_space(const FcifemSpace& space, int refinement) {
    return for_space(space, {refinement, refinement, refinement});
  }

  double coord(int axis, int idx) const { return lower[axis] + (idx + 0.5) * step[axis]; }
  double weight() const { return step[0] * step[1] * step[2]; }
  long long size() const { return 1LL * count[0] * count[1] * count[2]; }
  double total_weight() const { return weight() * static_cast<double>(size()); }
};

/// Field-line filament: samples x(zeta_l) of a curve with equal line weights.
struct FilamentCurve {
  std::vector<Point3> points;
  double weight = 0.0;
  double sign = 1.0;
};

struct SourceTerm {
  std::variant<std::function<double(const Point3&)>, std::vector<FilamentCurve>> source;

  static SourceTerm analytic(std::function<double(const Point3&)> rho) { return {std::move(rho)}; }
  static SourceTerm filaments(std::vector<FilamentCurve> curves) { return {std::move(curves)}; }
};

/// Two opposite filaments: the field line through `start` sampled at n_samples
/// uniform zeta values over one period (sign +1), and the same curve shifted
/// by half a period in zeta (sign -1). Line weights are zeta_period / n_samples
/// (rectangle rule, which is the trapezoidal rule on a periodic interval).
/// Throws std::runtime_error if the line leaves `domain` within the period.
SourceTerm make_filament_source(const FieldModel& field, const Point3& start, double zeta_period, int n_samples,
                                const Box2& domain, double tol = 1e-10);

struct AssemblyOptions {
  int threads = 1;
};

/// Sum over quadrature points of w grad(psi_a) . grad(psi_b).
SparseMatrix assemble_laplacian(const DiscreteSpace& space, const QuadratureGrid& quad, AssemblyOptions opt = {});
/// Sum over quadrature points of w psi_a psi_b.
SparseMatrix assemble_mass(const DiscreteSpace& space, const QuadratureGrid& quad, AssemblyOptions opt = {});

/// b_a = -sum_q w psi_a(x_q) rho(x_q) for analytic sources, and
/// b_a = -sum_curves sign * sum_l weight * psi_a(x_l) for filaments.
std::vector<double> assemble_rhs(const DiscreteSpace& space, const QuadratureGrid& quad, const SourceTerm& source,
                                 AssemblyOptions opt = {});

/// Integrals m_a = sum_q w psi_a(x_q) of the basis functions.
std::vector<double> basis_integrals(const DiscreteSpace& space, const QuadratureGrid& quad, AssemblyOptions opt = {});

/// 1D midpoint-quadrature mass and stiffness matrices of a spline axis with
/// `refinement` points per spacing (dense, row-major).
struct Spline1DMatrices {
  int n = 0;
  std::vector<double> mass;
  std::vector<double> stiffness;
};
Spline1DMatrices spline_matrices_1d(const Spline1D& axis, int refinement);

/// Tensor-spline (identity mapping) operators from Kronecker products of the
/// 1D matrices, with the same midpoint quadrature as the general assembler.
/// Dof numbering matches FcifemSpace.
SparseMatrix tensor_laplacian(const std::optional<Spline1D>& r, const Spline1D& z, const Spline1D& zeta,
                              std::array<int, 3> refinement);
SparseMatrix tensor_mass(const std::optional<Spline1D>& r, const Spline1D& z, const Spline1D& zeta,
                         std::array<int, 3> refinement);

}  // namespace fcifem
