#include "fcifem/spline1d.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fcifem {

Spline1D::Spline1D(int order, double spacing, int n_nodes, SplineBoundary boundary, double origin)
    : order_(order), h_(spacing), n_(n_nodes), boundary_(boundary), origin_(origin) {
  if (order != 1 && order != 2) throw std::invalid_argument("Spline1D: order must be 1 or 2");
  if (!(spacing > 0.0)) throw std::invalid_argument("Spline1D: spacing must be positive");
  // A periodic axis may carry fewer nodes than order + 1: its basis functions
  // then overlap their own periodic images (a single plane in zeta).
  const int min_nodes = periodic() ? 1 : order + 1;
  if (n_nodes < min_nodes) {
    throw std::invalid_argument("Spline1D: need at least " + std::to_string(min_nodes) + " nodes");
  }
  if (!periodic()) {
    const double a = lower();
    const double b = upper();
    const int cells = n_nodes - 1;
    knots_.assign(order + 1, a);
    if (order == 1) {
      for (int m = 1; m < cells; ++m) knots_.push_back(a + m * h_);
    } else {
      for (int m = 1; m + 1 < cells; ++m) knots_.push_back(a + (m + 0.5) * h_);
    }
    knots_.insert(knots_.end(), order + 1, b);
  }
}

int Spline1D::wrap(int i) const {
  if (!periodic()) return i;
  const int r = i % n_;
  return r < 0 ? r + n_ : r;
}

BasisWindow Spline1D::window(double x) const {
  if (!contains(x)) throw std::domain_error("Spline1D: x outside the clamped domain");
  return periodic() ? periodic_window(x) : clamped_window(x);
}

BasisWindow Spline1D::periodic_window(double x) const {
  BasisWindow w;
  const double t = (x - origin_) / h_;
  const double inv_h = 1.0 / h_;
  if (order_ == 1) {
    const double s = std::floor(t);
    const double u = t - s;
    w.first = static_cast<int>(s);
    w.count = 2;
    w.value = {1.0 - u, u, 0.0};
    w.deriv = {-inv_h, inv_h, 0.0};
  } else {
    // Knots of the centred quadratic sit at half-integers.
    const double s = std::floor(t + 0.5);
    const double u = t + 0.5 - s;
    w.first = static_cast<int>(s) - 1;
    w.count = 3;
    w.value = {0.5 * (1.0 - u) * (1.0 - u), 0.75 - (u - 0.5) * (u - 0.5), 0.5 * u * u};
    w.deriv = {-(1.0 - u) * inv_h, (1.0 - 2.0 * u) * inv_h, u * inv_h};
  }
  return w;
}

BasisWindow Spline1D::clamped_window(double x) const {
  const int p = order_;
  const int n_funcs = static_cast<int>(knots_.size()) - p - 1;
  int span = static_cast<int>(std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin()) - 1;
  span = std::clamp(span, p, n_funcs - 1);
  const double* t = knots_.data();

  // Nonzero basis values of degree 0..p at x (Cox-de Boor, triangular scheme).
  // low[] keeps degree p-1 values for the derivative.
  std::array<double, 3> val{1.0, 0.0, 0.0};
  std::array<double, 3> low{1.0, 0.0, 0.0};
  std::array<double, 3> left{};
  std::array<double, 3> right{};
  for (int j = 1; j <= p; ++j) {
    if (j == p) low = val;
    left[j] = x - t[span + 1 - j];
    right[j] = t[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = val[r] / (right[r + 1] + left[j - r]);
      val[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    val[j] = saved;
  }

  BasisWindow w;
  w.first = span - p;
  w.count = p + 1;
  w.value = val;
  // dN_{i,p} = p N_{i,p-1}/(t_{i+p}-t_i) - p N_{i+1,p-1}/(t_{i+p+1}-t_{i+1});
  // low[m] holds N_{span-p+1+m, p-1}.
  for (int m = 0; m <= p; ++m) {
    const int i = span - p + m;
    double d = 0.0;
    if (m >= 1) {
      const double den = t[i + p] - t[i];
      if (den > 0.0) d += p * low[m - 1] / den;
    }
    if (m <= p - 1) {
      const double den = t[i + p + 1] - t[i + 1];
      if (den > 0.0) d -= p * low[m] / den;
    }
    w.deriv[m] = d;
  }
  return w;
}

double Spline1D::eval_basis(int node_index, double x) const {
  const BasisWindow w = window(x);
  double sum = 0.0;
  for (int m = 0; m < w.count; ++m) {
    if (wrap(w.first + m) == wrap(node_index)) sum += w.value[m];
  }
  return sum;
}

double Spline1D::eval_basis_deriv(int node_index, double x) const {
  const BasisWindow w = window(x);
  double sum = 0.0;
  for (int m = 0; m < w.count; ++m) {
    if (wrap(w.first + m) == wrap(node_index)) sum += w.deriv[m];
  }
  return sum;
}

std::pair<int, int> Spline1D::nonzero_range(double x) const {
  const BasisWindow w = window(x);
  return {wrap(w.first), wrap(w.first + w.count - 1)};
}

}  // namespace fcifem
