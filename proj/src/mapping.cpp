#include "fcifem/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fcifem/dense.hpp"

namespace fcifem {

// ---------------------------------------------------------------- Mapping

MappedPoint Mapping::map(const Point3& x, double s) const {
  const MapJet j = jet(x, s);
  const bool inside = j.valid && (!domain_ || domain_->contains(j.r, j.z));
  return {j.r, j.z, inside};
}

void Mapping::map_column(double r, double z, std::span<const double> zetas, std::span<const double> targets,
                         std::span<MapJet> out) const {
  for (std::size_t i = 0; i < zetas.size(); ++i) out[i] = jet({r, z, zetas[i]}, targets[i]);
}

AnalyticStraightMapping::AnalyticStraightMapping(const FieldModel& field, std::optional<Box2> domain)
    : Mapping(domain) {
  if (field.kind() != FieldKind::straight) {
    throw std::invalid_argument("AnalyticStraightMapping requires a straight field");
  }
  slope_ = field.b_z() / field.b_zeta();
}

MapJet AnalyticStraightMapping::jet(const Point3& x, double s) const {
  MapJet j;
  j.r = x.r;
  j.z = x.z + slope_ * (s - x.zeta);
  j.dz = {0.0, 1.0, -slope_};
  return j;
}

MapJet IdentityMapping::jet(const Point3& x, double /*s*/) const {
  MapJet j;
  j.r = x.r;
  j.z = x.z;
  return j;
}

// ---------------------------------------------------------------- tracing

namespace {

/// Field-line state with its tangent map d(R, Z)/d(R0, Z0).
struct LineState {
  double r, z;
  double m00 = 1.0, m01 = 0.0, m10 = 0.0, m11 = 1.0;
};

LineState derivative(const FieldModel& field, const LineState& y, bool tangent) {
  const FieldDirection d = field.direction(y.r, y.z);
  LineState f{d.vr, d.vz, 0.0, 0.0, 0.0, 0.0};
  if (tangent) {
    f.m00 = d.dvr_dr * y.m00 + d.dvr_dz * y.m10;
    f.m01 = d.dvr_dr * y.m01 + d.dvr_dz * y.m11;
    f.m10 = d.dvz_dr * y.m00 + d.dvz_dz * y.m10;
    f.m11 = d.dvz_dr * y.m01 + d.dvz_dz * y.m11;
  }
  return f;
}

LineState axpy(const LineState& y, double a, const LineState& k) {
  return {y.r + a * k.r, y.z + a * k.z, y.m00 + a * k.m00, y.m01 + a * k.m01, y.m10 + a * k.m10, y.m11 + a * k.m11};
}

LineState rk4_step(const FieldModel& field, const LineState& y, double h, bool tangent) {
  const LineState k1 = derivative(field, y, tangent);
  const LineState k2 = derivative(field, axpy(y, 0.5 * h, k1), tangent);
  const LineState k3 = derivative(field, axpy(y, 0.5 * h, k2), tangent);
  const LineState k4 = derivative(field, axpy(y, h, k3), tangent);
  const double w = h / 6.0;
  LineState out = y;
  out.r += w * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r);
  out.z += w * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z);
  if (tangent) {
    out.m00 += w * (k1.m00 + 2.0 * k2.m00 + 2.0 * k3.m00 + k4.m00);
    out.m01 += w * (k1.m01 + 2.0 * k2.m01 + 2.0 * k3.m01 + k4.m01);
    out.m10 += w * (k1.m10 + 2.0 * k2.m10 + 2.0 * k3.m10 + k4.m10);
    out.m11 += w * (k1.m11 + 2.0 * k2.m11 + 2.0 * k3.m11 + k4.m11);
  }
  return out;
}

/// Advances `y` by `length` (signed) in equal steps no longer than `max_step`.
/// Returns false (with y clamped onto the box) when the line leaves `box`.
bool advance(const FieldModel& field, LineState& y, double length, double max_step, bool tangent,
             const std::optional<Box2>& box, const std::optional<Box2>& domain, bool* stayed, double* travelled) {
  if (length == 0.0) return true;
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(length) / max_step)));
  const double h = length / n;
  for (int i = 0; i < n; ++i) {
    y = rk4_step(field, y, h, tangent);
    if (travelled) *travelled += h;
    if (stayed && domain && !domain->contains(y.r, y.z)) *stayed = false;
    if (box && !box->contains(y.r, y.z)) {
      y.r = std::clamp(y.r, box->r_min, box->r_max);
      y.z = std::clamp(y.z, box->z_min, box->z_max);
      return false;
    }
  }
  return true;
}

MapJet jet_from_state(const FieldModel& field, const LineState& y) {
  const FieldDirection d = field.direction(y.r, y.z);
  MapJet j;
  j.r = y.r;
  j.z = y.z;
  // Q(x, s) = Phi_{s - zeta}(R, Z) for a zeta-independent field, so dQ/dzeta = -v(Q).
  j.dr = {y.m00, y.m01, -d.vr};
  j.dz = {y.m10, y.m11, -d.vz};
  return j;
}

}  // namespace

double rk4_step_for_tolerance(double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("rk4_step_for_tolerance: tol must be positive");
  // Worst global RK4 position error over a unit zeta interval on the divertor
  // field inside the extended domain is about 4.7 h^4 (measured against a
  // much finer integration); 5 h^4 is used.
  return std::min(0.02, std::pow(tol / 5.0, 0.25));
}

TraceResult trace_field_line(const FieldModel& field, const Point3& start, double zeta_end, double tol,
                             std::optional<Box2> box, std::optional<Box2> domain) {
  LineState y{start.r, start.z};
  TraceResult res;
  if (domain && !domain->contains(y.r, y.z)) res.stayed_in_domain = false;
  double travelled = 0.0;
  const bool ok = advance(field, y, zeta_end - start.zeta, rk4_step_for_tolerance(tol), false, box, domain,
                          &res.stayed_in_domain, &travelled);
  res.end = {y.r, y.z};
  if (!ok) {
    res.exited = true;
    res.stayed_in_domain = false;
    res.exit_zeta = start.zeta + travelled;
  }
  return res;
}

ExactOdeMapping::ExactOdeMapping(const FieldModel& field, std::optional<Box2> domain, double tol)
    : Mapping(domain), field_(field), tol_(tol), step_(rk4_step_for_tolerance(tol)) {
  if (domain) box_ = domain->expanded(0.2);
}

TraceResult ExactOdeMapping::trace(const Point3& x, double s) const {
  return trace_field_line(field_, x, s, tol_, box_, domain());
}

MappedPoint ExactOdeMapping::map(const Point3& x, double s) const {
  const TraceResult t = trace(x, s);
  const bool inside = !t.exited && (!domain() || domain()->contains(t.end));
  return {t.end.r, t.end.z, inside};
}

MapJet ExactOdeMapping::jet(const Point3& x, double s) const {
  LineState y{x.r, x.z};
  const bool ok = advance(field_, y, s - x.zeta, step_, true, box_, std::nullopt, nullptr, nullptr);
  MapJet j = jet_from_state(field_, y);
  j.valid = ok;
  return j;
}

void ExactOdeMapping::map_column(double r, double z, std::span<const double> zetas, std::span<const double> targets,
                                 std::span<MapJet> out) const {
  const std::size_t n = zetas.size();
  std::vector<double> delta(n);
  for (std::size_t i = 0; i < n; ++i) delta[i] = targets[i] - zetas[i];
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return delta[a] < delta[b]; });

  // One forward sweep over the nonnegative offsets and one backward sweep over
  // the negative ones, both starting from the source point.
  auto sweep = [&](auto begin, auto end) {
    LineState y{r, z};
    double at = 0.0;
    bool ok = true;
    for (auto it = begin; it != end; ++it) {
      const std::size_t i = *it;
      if (ok) ok = advance(field_, y, delta[i] - at, step_, true, box_, std::nullopt, nullptr, nullptr);
      at = delta[i];
      out[i] = jet_from_state(field_, y);
      out[i].valid = ok;
    }
  };
  const auto split = std::partition_point(order.begin(), order.end(), [&](std::size_t i) { return delta[i] < 0.0; });
  sweep(split, order.end());
  sweep(std::make_reverse_iterator(split), std::make_reverse_iterator(order.begin()));
}

// ---------------------------------------------------------------- splines

namespace {

DenseLU collocation(const Spline1D& axis) {
  const int n = axis.n_nodes();
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
  for (int m = 0; m < n; ++m) {
    const BasisWindow w = axis.window(axis.node(m));
    for (int q = 0; q < w.count; ++q) a[m * n + axis.wrap(w.first + q)] += w.value[q];
  }
  return DenseLU(n, std::move(a));
}

}  // namespace

TensorSpline2D::TensorSpline2D(Spline1D r_axis, Spline1D z_axis, std::span<const double> nodal)
    : r_axis_(std::move(r_axis)), z_axis_(std::move(z_axis)) {
  const int nr = r_axis_.n_nodes();
  const int nz = z_axis_.n_nodes();
  if (static_cast<int>(nodal.size()) != nr * nz) throw std::invalid_argument("TensorSpline2D: nodal size mismatch");
  coef_.assign(nodal.begin(), nodal.end());
  const DenseLU lu_r = collocation(r_axis_);
  const DenseLU lu_z = collocation(z_axis_);
  for (int j = 0; j < nz; ++j) lu_r.solve(std::span<double>(coef_.data() + static_cast<std::size_t>(j) * nr, nr));
  std::vector<double> column(nz);
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nz; ++j) column[j] = coef_[j * nr + i];
    lu_z.solve(column);
    for (int j = 0; j < nz; ++j) coef_[j * nr + i] = column[j];
  }
}

TensorSpline2D::Value TensorSpline2D::eval(double r, double z) const {
  const BasisWindow wr = r_axis_.window(r);
  const BasisWindow wz = z_axis_.window(z);
  const int nr = r_axis_.n_nodes();
  Value v;
  for (int b = 0; b < wz.count; ++b) {
    const int j = z_axis_.wrap(wz.first + b);
    double row = 0.0;
    double row_dr = 0.0;
    for (int a = 0; a < wr.count; ++a) {
      const double c = coef_[j * nr + r_axis_.wrap(wr.first + a)];
      row += c * wr.value[a];
      row_dr += c * wr.deriv[a];
    }
    v.f += row * wz.value[b];
    v.df_dr += row_dr * wz.value[b];
    v.df_dz += row * wz.deriv[b];
  }
  return v;
}

// ---------------------------------------------------------------- Taylor

TaylorSplineMapping::TaylorSplineMapping(TensorSpline2D c1r, TensorSpline2D c1z, std::optional<TensorSpline2D> c2r,
                                         std::optional<TensorSpline2D> c2z, std::optional<Box2> domain)
    : Mapping(domain), c1r_(std::move(c1r)), c1z_(std::move(c1z)), c2r_(std::move(c2r)), c2z_(std::move(c2z)) {
  if (c2r_.has_value() != c2z_.has_value()) {
    throw std::invalid_argument("TaylorSplineMapping: quadratic coefficients must come in pairs");
  }
}

TaylorSplineMapping::Coefficients TaylorSplineMapping::coefficients(double r, double z) const {
  const Spline1D& ra = c1r_.r_axis();
  const Spline1D& za = c1r_.z_axis();
  const double rc = ra.periodic() ? r : std::clamp(r, ra.lower(), ra.upper());
  const double zc = za.periodic() ? z : std::clamp(z, za.lower(), za.upper());
  Coefficients c;
  c.c1r = c1r_.eval(rc, zc);
  c.c1z = c1z_.eval(rc, zc);
  if (c2r_) {
    c.c2r = c2r_->eval(rc, zc);
    c.c2z = c2z_->eval(rc, zc);
  }
  return c;
}

MapJet TaylorSplineMapping::expand(double r, double z, const Coefficients& c, double delta) {
  const double d2 = delta * delta;
  MapJet j;
  j.r = r + c.c1r.f * delta + c.c2r.f * d2;
  j.z = z + c.c1z.f * delta + c.c2z.f * d2;
  j.dr = {1.0 + c.c1r.df_dr * delta + c.c2r.df_dr * d2, c.c1r.df_dz * delta + c.c2r.df_dz * d2,
          -(c.c1r.f + 2.0 * c.c2r.f * delta)};
  j.dz = {c.c1z.df_dr * delta + c.c2z.df_dr * d2, 1.0 + c.c1z.df_dz * delta + c.c2z.df_dz * d2,
          -(c.c1z.f + 2.0 * c.c2z.f * delta)};
  return j;
}

MapJet TaylorSplineMapping::jet(const Point3& x, double s) const {
  return expand(x.r, x.z, coefficients(x.r, x.z), s - x.zeta);
}

void TaylorSplineMapping::map_column(double r, double z, std::span<const double> zetas,
                                     std::span<const double> targets, std::span<MapJet> out) const {
  const Coefficients c = coefficients(r, z);
  for (std::size_t i = 0; i < zetas.size(); ++i) out[i] = expand(r, z, c, targets[i] - zetas[i]);
}

TaylorSplineMapping build_taylor_mapping(const FieldModel& field, const Spline1D& r_grid, const Spline1D& z_grid,
                                         int taylor_order, std::optional<Box2> domain) {
  if (taylor_order != 1 && taylor_order != 2) throw std::invalid_argument("build_taylor_mapping: order must be 1 or 2");
  const int nr = r_grid.n_nodes();
  const int nz = z_grid.n_nodes();
  std::vector<double> v_r(nr * nz), v_z(nr * nz), a_r(nr * nz), a_z(nr * nz);
  for (int j = 0; j < nz; ++j) {
    for (int i = 0; i < nr; ++i) {
      const FieldDirection d = field.direction(r_grid.node(i), z_grid.node(j));
      const int idx = j * nr + i;
      v_r[idx] = d.vr;
      v_z[idx] = d.vz;
      // d2Q/dzeta2 = (grad v) v along the line; the Taylor term carries 1/2.
      a_r[idx] = 0.5 * (d.dvr_dr * d.vr + d.dvr_dz * d.vz);
      a_z[idx] = 0.5 * (d.dvz_dr * d.vr + d.dvz_dz * d.vz);
    }
  }
  std::optional<TensorSpline2D> c2r;
  std::optional<TensorSpline2D> c2z;
  if (taylor_order == 2) {
    c2r.emplace(r_grid, z_grid, a_r);
    c2z.emplace(r_grid, z_grid, a_z);
  }
  return TaylorSplineMapping(TensorSpline2D(r_grid, z_grid, v_r), TensorSpline2D(r_grid, z_grid, v_z),
                             std::move(c2r), std::move(c2z), domain);
}

// ---------------------------------------------------------------- error report

MappingErrorReport mapping_error_report(const Mapping& approx, const ExactOdeMapping& exact,
                                        std::span<const Point3> seeds, double zeta_end) {
  MappingErrorReport rep;
  double sum_sq = 0.0;
  for (const Point3& seed : seeds) {
    SeedError e;
    e.seed = seed;
    const TraceResult t = exact.trace(seed, zeta_end);
    e.exact = t.end;
    e.survived = !t.exited && t.stayed_in_domain;
    const MapJet a = approx.jet(seed, zeta_end);
    e.approx = {a.r, a.z};
    e.error = distance(e.exact, e.approx);
    if (e.survived) {
      ++rep.survivors;
      sum_sq += e.error * e.error;
      rep.max = std::max(rep.max, e.error);
    }
    rep.per_seed.push_back(e);
  }
  if (rep.survivors == 0) throw std::runtime_error("mapping_error_report: no seed stays inside the domain");
  rep.rms = std::sqrt(sum_sq / rep.survivors);
  return rep;
}

}  // namespace fcifem
