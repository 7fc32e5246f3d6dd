#include "fcifem/representation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace fcifem {

void merge_terms(std::vector<BasisTerm>& terms) {
  std::sort(terms.begin(), terms.end(), [](const BasisTerm& a, const BasisTerm& b) { return a.dof < b.dof; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (out > 0 && terms[out - 1].dof == terms[i].dof) {
      BasisTerm& t = terms[out - 1];
      t.value += terms[i].value;
      for (int c = 0; c < 3; ++c) t.grad[c] += terms[i].grad[c];
    } else {
      terms[out++] = terms[i];
    }
  }
  terms.resize(out);
}

CoefficientVector::CoefficientVector(std::vector<double> values) : values_(std::move(values)) {
  if (!all_finite()) throw std::invalid_argument("CoefficientVector: non-finite value");
}

bool CoefficientVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void DiscreteSpace::basis_at(const Point3& x, std::vector<BasisTerm>& out) const {
  const FcifemSpace& s = fcifem();
  std::array<PlaneImage, 3> images;
  const int n = s.plane_images(x.zeta, images);
  std::array<MapJet, 3> jets;
  for (int m = 0; m < n; ++m) jets[m] = s.mapping().jet(x, images[m].s);
  out.clear();
  point_terms(x, std::span(images.data(), n), std::span(jets.data(), n), out);
}

// ---------------------------------------------------------------- FcifemSpace

FcifemSpace::FcifemSpace(std::optional<Spline1D> r_axis, Spline1D z_axis, Spline1D zeta_axis,
                         std::shared_ptr<const Mapping> mapping)
    : r_axis_(std::move(r_axis)), z_axis_(std::move(z_axis)), zeta_axis_(std::move(zeta_axis)),
      mapping_(std::move(mapping)) {
  if (!zeta_axis_.periodic()) throw std::invalid_argument("FcifemSpace: the zeta axis must be periodic");
  if (!mapping_) throw std::invalid_argument("FcifemSpace: mapping required");
}

const Spline1D& FcifemSpace::r_axis() const {
  if (!r_axis_) throw std::logic_error("FcifemSpace: space has no R axis");
  return *r_axis_;
}

std::array<int, 3> FcifemSpace::node_of(int dof) const {
  const int i = dof % n_r();
  const int rest = dof / n_r();
  return {i, rest % n_z(), rest / n_z()};
}

Point3 FcifemSpace::node_position(int dof) const {
  const auto [i, j, k] = node_of(dof);
  return {r_axis_ ? r_axis_->node(i) : 0.0, z_axis_.node(j), zeta_axis_.node(k)};
}

Box2 FcifemSpace::plane_box() const {
  const double r0 = r_axis_ ? r_axis_->lower() : 0.0;
  const double r1 = r_axis_ ? r_axis_->upper() : 0.0;
  return {r0, r1, z_axis_.lower(), z_axis_.upper()};
}

bool FcifemSpace::contains(const Point3& x) const {
  return (!r_axis_ || r_axis_->contains(x.r)) && z_axis_.contains(x.z);
}

void FcifemSpace::check_point(const Point3& x) const {
  if (!contains(x)) throw std::domain_error("FcifemSpace: point outside the domain");
}

int FcifemSpace::plane_images(double zeta, std::array<PlaneImage, 3>& out) const {
  const BasisWindow w = zeta_axis_.window(zeta);
  for (int m = 0; m < w.count; ++m) {
    const int k = w.first + m;
    out[m] = {zeta_axis_.wrap(k), zeta_axis_.node(k), w.value[m], w.deriv[m]};
  }
  return w.count;
}

void FcifemSpace::point_terms(const Point3& /*x*/, std::span<const PlaneImage> images, std::span<const MapJet> jets,
                              std::vector<BasisTerm>& out) const {
  for (std::size_t m = 0; m < images.size(); ++m) {
    const PlaneImage& img = images[m];
    const MapJet& q = jets[m];
    // A field line that left the tracing box contributes nothing. Images just
    // outside the (R,Z) box use the end-span polynomials continued outwards;
    // dropping them would break partition of unity in a layer next to the
    // boundary whose width is the field-line displacement between planes.
    if (!q.valid) continue;

    BasisWindow wr;
    if (r_axis_) {
      wr = r_axis_->extended_window(q.r);
    } else {
      wr.count = 1;
      wr.value[0] = 1.0;
    }
    const BasisWindow wz = z_axis_.extended_window(q.z);
    for (int b = 0; b < wz.count; ++b) {
      const int j = z_axis_.wrap(wz.first + b);
      for (int a = 0; a < wr.count; ++a) {
        const int i = r_axis_ ? r_axis_->wrap(wr.first + a) : 0;
        const double rz = wr.value[a] * wz.value[b];
        BasisTerm t;
        t.dof = dof(i, j, img.k);
        t.value = img.weight * rz;
        // Chain rule through the mapped arguments.
        const double dr = img.weight * wr.deriv[a] * wz.value[b];
        const double dz = img.weight * wr.value[a] * wz.deriv[b];
        for (int c = 0; c < 3; ++c) t.grad[c] = dr * q.dr[c] + dz * q.dz[c];
        t.grad[2] += img.weight_deriv * rz;
        out.push_back(t);
      }
    }
  }
}

double FcifemSpace::evaluate(const CoefficientVector& c, const Point3& x) const {
  if (c.size() != dof_count()) throw std::invalid_argument("FcifemSpace::evaluate: coefficient size mismatch");
  check_point(x);
  std::vector<BasisTerm> terms;
  basis_at(x, terms);
  double v = 0.0;
  for (const BasisTerm& t : terms) v += c[t.dof] * t.value;
  return v;
}

Vec3 FcifemSpace::evaluate_gradient(const CoefficientVector& c, const Point3& x) const {
  if (c.size() != dof_count()) throw std::invalid_argument("FcifemSpace::evaluate_gradient: coefficient size mismatch");
  check_point(x);
  std::vector<BasisTerm> terms;
  basis_at(x, terms);
  Vec3 g{0.0, 0.0, 0.0};
  for (const BasisTerm& t : terms) {
    for (int k = 0; k < 3; ++k) g[k] += c[t.dof] * t.grad[k];
  }
  return g;
}

CoefficientVector FcifemSpace::interpolate_nodal(const std::function<double(const Point3&)>& f) const {
  std::vector<double> v(dof_count());
  for (int d = 0; d < dof_count(); ++d) v[d] = f(node_position(d));
  return CoefficientVector(std::move(v));
}

// ---------------------------------------------------------------- BlendedSpace

namespace {

Spline1D hat_axis(const Spline1D& axis, SplineBoundary boundary) {
  return Spline1D(1, axis.spacing(), axis.n_nodes(), boundary, axis.origin());
}

/// Sum of the two end hats of a clamped axis and its derivative.
std::pair<double, double> end_hats(const Spline1D& axis, double x) {
  const double h = axis.spacing();
  const double t0 = (x - axis.lower()) / h;
  const double t1 = (axis.upper() - x) / h;
  double v = 0.0;
  double d = 0.0;
  if (t0 < 1.0) {
    v += 1.0 - t0;
    d -= 1.0 / h;
  }
  if (t1 < 1.0) {
    v += 1.0 - t1;
    d += 1.0 / h;
  }
  return {v, d};
}

}  // namespace

BlendedSpace::BlendedSpace(FcifemSpace fcifem)
    : fcifem_(std::move(fcifem)),
      at_node_r_(node_samples(fcifem_.r_axis())),
      at_node_z_(node_samples(fcifem_.z_axis())),
      hat_r_(hat_axis(fcifem_.r_axis(), SplineBoundary::clamped)),
      hat_z_(hat_axis(fcifem_.z_axis(), SplineBoundary::clamped)),
      hat_zeta_(hat_axis(fcifem_.zeta_axis(), SplineBoundary::periodic)) {
  if (fcifem_.r_axis().periodic() || fcifem_.z_axis().periodic()) {
    throw std::invalid_argument("BlendedSpace: R and Z axes must be clamped");
  }
}

std::vector<BlendedSpace::NodeSample> BlendedSpace::node_samples(const Spline1D& axis) {
  std::vector<NodeSample> out(axis.n_nodes());
  for (int i = 0; i < axis.n_nodes(); ++i) {
    const BasisWindow w = axis.window(axis.node(i));
    for (int m = 0; m < w.count; ++m) {
      if (w.value[m] == 0.0) continue;
      NodeSample& ns = out[i];
      ns.index[ns.count] = axis.wrap(w.first + m);
      ns.value[ns.count] = w.value[m];
      ++ns.count;
    }
  }
  return out;
}

bool BlendedSpace::is_boundary_node(int i, int j) const {
  return i == 0 || j == 0 || i == fcifem_.n_r() - 1 || j == fcifem_.n_z() - 1;
}

BlendedSpace::Ramp BlendedSpace::ramp(double r, double z) const {
  const auto [br, dbr] = end_hats(fcifem_.r_axis(), r);
  const auto [bz, dbz] = end_hats(fcifem_.z_axis(), z);
  return {1.0 - (1.0 - br) * (1.0 - bz), dbr * (1.0 - bz), (1.0 - br) * dbz};
}

void BlendedSpace::point_terms(const Point3& x, std::span<const PlaneImage> images, std::span<const MapJet> jets,
                               std::vector<BasisTerm>& out) const {
  const std::size_t start = out.size();
  fcifem_.point_terms(x, images, jets, out);
  const Ramp b = ramp(x.r, x.z);
  if (b.value == 0.0) return;
  const double keep = 1.0 - b.value;
  for (std::size_t n = start; n < out.size(); ++n) {
    BasisTerm& t = out[n];
    t.grad[0] = keep * t.grad[0] - b.d_dr * t.value;
    t.grad[1] = keep * t.grad[1] - b.d_dz * t.value;
    t.grad[2] = keep * t.grad[2];
    t.value *= keep;
  }
  // Boundary FEM part: bilinear hats in (R, Z) times linear hats in zeta, with
  // nodal values taken from the plane function at the node. For quadratic
  // splines the coefficients themselves are not nodal values (next to a
  // clamped end they are off by O(h)), so each hat expands into the spline
  // coefficients that are nonzero at its node.
  const BasisWindow wr = hat_r_.window(x.r);
  const BasisWindow wz = hat_z_.window(x.z);
  const BasisWindow wk = hat_zeta_.window(x.zeta);
  for (int c = 0; c < wk.count; ++c) {
    const int k = hat_zeta_.wrap(wk.first + c);
    for (int bb = 0; bb < wz.count; ++bb) {
      for (int a = 0; a < wr.count; ++a) {
        if (is_boundary_node(wr.first + a, wz.first + bb)) continue;
        const double hr = wr.value[a], hz = wz.value[bb], hk = wk.value[c];
        const double kv = hr * hz * hk;
        const double value = b.value * kv;
        const Vec3 grad{b.value * wr.deriv[a] * hz * hk + kv * b.d_dr, b.value * hr * wz.deriv[bb] * hk + kv * b.d_dz,
                        b.value * hr * hz * wk.deriv[c]};
        const NodeSample& sr = at_node_r_[wr.first + a];
        const NodeSample& sz = at_node_z_[wz.first + bb];
        for (int q = 0; q < sz.count; ++q) {
          for (int p = 0; p < sr.count; ++p) {
            const double w = sr.value[p] * sz.value[q];
            BasisTerm t;
            t.dof = fcifem_.dof(sr.index[p], sz.index[q], k);
            t.value = w * value;
            for (int e = 0; e < 3; ++e) t.grad[e] = w * grad[e];
            out.push_back(t);
          }
        }
      }
    }
  }
}

double BlendedSpace::evaluate(const CoefficientVector& c, const Point3& x) const {
  if (c.size() != fcifem_.dof_count()) throw std::invalid_argument("BlendedSpace::evaluate: size mismatch");
  if (!fcifem_.contains(x)) throw std::domain_error("BlendedSpace: point outside the domain");
  std::array<PlaneImage, 3> images;
  const int n = fcifem_.plane_images(x.zeta, images);
  std::array<MapJet, 3> jets;
  for (int m = 0; m < n; ++m) jets[m] = fcifem_.mapping().jet(x, images[m].s);
  std::vector<BasisTerm> terms;
  point_terms(x, std::span(images.data(), n), std::span(jets.data(), n), terms);
  double v = 0.0;
  for (const BasisTerm& t : terms) v += c[t.dof] * t.value;
  return v;
}

Vec3 BlendedSpace::evaluate_gradient(const CoefficientVector& c, const Point3& x) const {
  if (c.size() != fcifem_.dof_count()) throw std::invalid_argument("BlendedSpace::evaluate_gradient: size mismatch");
  if (!fcifem_.contains(x)) throw std::domain_error("BlendedSpace: point outside the domain");
  std::array<PlaneImage, 3> images;
  const int n = fcifem_.plane_images(x.zeta, images);
  std::array<MapJet, 3> jets;
  for (int m = 0; m < n; ++m) jets[m] = fcifem_.mapping().jet(x, images[m].s);
  std::vector<BasisTerm> terms;
  point_terms(x, std::span(images.data(), n), std::span(jets.data(), n), terms);
  Vec3 g{0.0, 0.0, 0.0};
  for (const BasisTerm& t : terms) {
    for (int e = 0; e < 3; ++e) g[e] += c[t.dof] * t.grad[e];
  }
  return g;
}

// ---------------------------------------------------------------- export

SampleGrid SampleGrid::for_space(const FcifemSpace& space, int oversample, bool single_zeta_plane) {
  if (oversample < 1) throw std::invalid_argument("SampleGrid: oversample must be >= 1");
  SampleGrid g;
  auto fill = [&](int axis, const Spline1D& s) {
    g.lower[axis] = s.lower();
    g.step[axis] = s.spacing() / oversample;
    g.shape[axis] = s.periodic() ? s.n_nodes() * oversample : (s.n_nodes() - 1) * oversample + 1;
    g.upper[axis] = s.upper();
  };
  if (space.has_r()) fill(0, space.r_axis());
  fill(1, space.z_axis());
  fill(2, space.zeta_axis());
  if (single_zeta_plane) g.shape[2] = 1;
  return g;
}

void write_field_csv(const std::string& path, const SampleGrid& grid,
                     const std::function<double(const Point3&)>& field) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_field_csv: cannot open " + path);
  out << std::setprecision(17);
  out << "# fcifem field samples\n";
  out << "# lower: " << grid.lower[0] << ',' << grid.lower[1] << ',' << grid.lower[2] << '\n';
  out << "# step: " << grid.step[0] << ',' << grid.step[1] << ',' << grid.step[2] << '\n';
  out << "# shape: " << grid.shape[0] << ',' << grid.shape[1] << ',' << grid.shape[2] << '\n';
  out << "r,z,zeta,value\n";
  for (int c = 0; c < grid.shape[2]; ++c) {
    for (int b = 0; b < grid.shape[1]; ++b) {
      for (int a = 0; a < grid.shape[0]; ++a) {
        const Point3 p = grid.point(a, b, c);
        out << p.r << ',' << p.z << ',' << p.zeta << ',' << field(p) << '\n';
      }
    }
  }
  if (!out) throw std::runtime_error("write_field_csv: write failed for " + path);
}

}  // namespace fcifem
