#pragma once

#include <array>
#include <utility>
#include <vector>

namespace fcifem {

enum class SplineBoundary { periodic, clamped };

/// Values and first derivatives of the basis functions that can be nonzero at
/// one point. Indices run from `first` to `first + count - 1`; for periodic
/// splines they are *unwrapped* (use Spline1D::wrap to get node indices).
struct BasisWindow {
  int first = 0;
  int count = 0;
  std::array<double, 3> value{};
  std::array<double, 3> deriv{};
};

/// Uniform B-spline basis of order 1 (hat) or 2 (quadratic) on nodes
/// `origin + i * spacing`.
///
/// Periodic splines have n_nodes basis functions, function i centred on node i,
/// with period n_nodes * spacing. Clamped splines live on
/// [origin, origin + (n_nodes - 1) * spacing] and use an open knot vector so
/// that exactly one basis function is nonzero (and equal to 1) at each end.
/// For order 2 the interior knots sit at the cell midpoints, which keeps
/// basis function i centred on node i away from the ends.
///
/// At knots the right-continuous piece is used (derivatives of order-1
/// splines, and the index range reported by nonzero_range); at the upper end of
/// a clamped domain the last piece is used.
class Spline1D {
 public:
  Spline1D(int order, double spacing, int n_nodes, SplineBoundary boundary, double origin = 0.0);

  int order() const { return order_; }
  double spacing() const { return h_; }
  int n_nodes() const { return n_; }
  SplineBoundary boundary() const { return boundary_; }
  bool periodic() const { return boundary_ == SplineBoundary::periodic; }
  double origin() const { return origin_; }

  double node(int i) const { return origin_ + i * h_; }
  double lower() const { return origin_; }
  /// Upper end of the domain (one period for periodic splines).
  double upper() const { return periodic() ? origin_ + n_ * h_ : origin_ + (n_ - 1) * h_; }
  double length() const { return upper() - lower(); }

  /// Periodic splines accept any x; clamped splines require lower() <= x <= upper().
  bool contains(double x) const { return periodic() || (x >= lower() && x <= upper()); }

  int wrap(int i) const;

  /// Omega_i(x); throws std::domain_error for clamped splines outside the domain.
  double eval_basis(int node_index, double x) const;
  double eval_basis_deriv(int node_index, double x) const;

  /// First and last (wrapped) index of the order+1 consecutive basis functions
  /// covering x.
  std::pair<int, int> nonzero_range(double x) const;

  /// All candidate nonzero basis functions at x with their derivatives.
  /// Throws std::domain_error when !contains(x).
  BasisWindow window(double x) const;
  /// Like window(), but clamped splines continue the polynomial pieces of the
  /// end spans beyond the domain (partition of unity and polynomial
  /// reproduction still hold there).
  BasisWindow extended_window(double x) const { return periodic() ? periodic_window(x) : clamped_window(x); }

  /// Knot vector of a clamped spline (empty for periodic ones).
  const std::vector<double>& knots() const { return knots_; }

 private:
  BasisWindow periodic_window(double x) const;
  BasisWindow clamped_window(double x) const;

  int order_;
  double h_;
  int n_;
  SplineBoundary boundary_;
  double origin_;
  std::vector<double> knots_;
};

}  // namespace fcifem
