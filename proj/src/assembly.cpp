#include "fcifem/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace fcifem {

QuadratureGrid QuadratureGrid::for_space(const FcifemSpace& space, std::array<int, 3> refinement) {
  for (int r : refinement) {
    if (r < 1) throw std::invalid_argument("QuadratureGrid: refinement must be >= 1");
  }
  QuadratureGrid q;
  auto fill = [&](int axis, const Spline1D& s) {
    const int cells = s.periodic() ? s.n_nodes() : s.n_nodes() - 1;
    q.count[axis] = cells * refinement[axis];
    q.step[axis] = s.spacing() / refinement[axis];
    q.lower[axis] = s.lower();
  };
  if (space.has_r()) {
    fill(0, space.r_axis());
  } else {
    // One point of unit width at R = 0.
    q.lower[0] = -0.5;
  }
  fill(1, space.z_axis());
  fill(2, space.zeta_axis());
  return q;
}

SourceTerm make_filament_source(const FieldModel& field, const Point3& start, double zeta_period, int n_samples,
                                const Box2& domain, double tol) {
  if (n_samples < 1 || !(zeta_period > 0.0)) throw std::invalid_argument("make_filament_source: bad sampling");
  if (!domain.contains(start.r, start.z)) throw std::runtime_error("make_filament_source: start outside the domain");
  const double dz = zeta_period / n_samples;
  FilamentCurve plus{{}, dz, 1.0};
  FilamentCurve minus{{}, dz, -1.0};
  Point3 at = start;
  for (int l = 0; l < n_samples; ++l) {
    const double zeta = start.zeta + l * dz;
    if (l > 0) {
      const TraceResult t = trace_field_line(field, at, zeta, tol, domain, domain);
      if (t.exited || !t.stayed_in_domain) {
        throw std::runtime_error("make_filament_source: field line leaves the domain at zeta = " +
                                 std::to_string(zeta));
      }
      at = {t.end.r, t.end.z, zeta};
    }
    plus.points.push_back(at);
    double shifted = zeta + 0.5 * zeta_period;
    if (shifted >= start.zeta + zeta_period) shifted -= zeta_period;
    minus.points.push_back({at.r, at.z, shifted});
  }
  return SourceTerm::filaments({std::move(plus), std::move(minus)});
}

namespace {

/// Visits every quadrature point with Z-index in [z_begin, z_end), passing the
/// merged basis terms. Field-line maps are computed a whole (R, Z) column at
/// a time; within a column, R varies fastest so that consecutive points tend
/// to share their dof lists.
template <class Visitor>
void visit_points(const DiscreteSpace& space, const QuadratureGrid& quad, int z_begin, int z_end, Visitor&& visit) {
  const FcifemSpace& fs = space.fcifem();
  const int nq = quad.count[2];
  const int nr = quad.count[0];
  std::vector<std::array<PlaneImage, 3>> images(nq);
  std::vector<int> n_images(nq);
  std::vector<int> offset(nq + 1, 0);
  for (int q = 0; q < nq; ++q) {
    n_images[q] = fs.plane_images(quad.coord(2, q), images[q]);
    offset[q + 1] = offset[q] + n_images[q];
  }
  const int per_column = offset[nq];
  std::vector<double> zetas(per_column);
  std::vector<double> targets(per_column);
  for (int q = 0; q < nq; ++q) {
    for (int m = 0; m < n_images[q]; ++m) {
      zetas[offset[q] + m] = quad.coord(2, q);
      targets[offset[q] + m] = images[q][m].s;
    }
  }
  std::vector<MapJet> jets(static_cast<std::size_t>(nr) * per_column);
  std::vector<BasisTerm> terms;
  const Mapping& mapping = fs.mapping();
  for (int iz = z_begin; iz < z_end; ++iz) {
    const double z = quad.coord(1, iz);
    for (int ir = 0; ir < nr; ++ir) {
      mapping.map_column(quad.coord(0, ir), z, zetas, targets,
                         std::span(jets.data() + static_cast<std::size_t>(ir) * per_column, per_column));
    }
    for (int q = 0; q < nq; ++q) {
      const std::span<const PlaneImage> img(images[q].data(), n_images[q]);
      for (int ir = 0; ir < nr; ++ir) {
        const Point3 x{quad.coord(0, ir), z, quad.coord(2, q)};
        terms.clear();
        space.point_terms(x, img,
                          std::span<const MapJet>(jets.data() + static_cast<std::size_t>(ir) * per_column + offset[q],
                                                  n_images[q]),
                          terms);
        merge_terms(terms);
        std::erase_if(terms, [](const BasisTerm& t) {
          return t.value == 0.0 && t.grad[0] == 0.0 && t.grad[1] == 0.0 && t.grad[2] == 0.0;
        });
        if (!terms.empty()) visit(x, terms);
      }
    }
  }
}

/// Runs `work(z_begin, z_end, slot)` over contiguous Z-row chunks, one per thread.
template <class Work>
void run_chunks(int n_rows, int threads, Work&& work) {
  threads = std::clamp(threads, 1, std::max(1, n_rows));
  if (threads == 1) {
    work(0, n_rows, 0);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    const int b = static_cast<int>(1LL * n_rows * t / threads);
    const int e = static_cast<int>(1LL * n_rows * (t + 1) / threads);
    pool.emplace_back([&, b, e, t] { work(b, e, t); });
  }
  for (std::thread& th : pool) th.join();
}

enum class Form { stiffness, mass };

/// Dense accumulation of the local matrix while consecutive points share the
/// same dof list; flushed into the sparse accumulator when the list changes.
/// Both triangles receive the same value, so the result is exactly symmetric.
class LocalBlock {
 public:
  LocalBlock(SparseAccumulator& acc, Form form) : acc_(acc), form_(form) {}
  ~LocalBlock() { flush(); }

  void add(double w, const std::vector<BasisTerm>& t) {
    const std::size_t n = t.size();
    bool same = n == dofs_.size();
    for (std::size_t a = 0; same && a < n; ++a) same = dofs_[a] == t[a].dof;
    if (!same) {
      flush();
      dofs_.resize(n);
      for (std::size_t a = 0; a < n; ++a) dofs_[a] = t[a].dof;
      block_.assign(n * n, 0.0);
    }
    if (form_ == Form::stiffness) {
      for (std::size_t a = 0; a < n; ++a) {
        const double ga0 = w * t[a].grad[0], ga1 = w * t[a].grad[1], ga2 = w * t[a].grad[2];
        double* row = block_.data() + a * n;
        for (std::size_t b = a; b < n; ++b) row[b] += ga0 * t[b].grad[0] + ga1 * t[b].grad[1] + ga2 * t[b].grad[2];
      }
    } else {
      for (std::size_t a = 0; a < n; ++a) {
        const double va = w * t[a].value;
        double* row = block_.data() + a * n;
        for (std::size_t b = a; b < n; ++b) row[b] += va * t[b].value;
      }
    }
  }

  void flush() {
    const std::size_t n = dofs_.size();
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a; b < n; ++b) {
        const double v = block_[a * n + b];
        acc_.add(dofs_[a], dofs_[b], v);
        if (b != a) acc_.add(dofs_[b], dofs_[a], v);
      }
    }
    dofs_.clear();
  }

 private:
  SparseAccumulator& acc_;
  Form form_;
  std::vector<int> dofs_;
  std::vector<double> block_;
};

SparseMatrix assemble_form(const DiscreteSpace& space, const QuadratureGrid& quad, Form form, AssemblyOptions opt) {
  const int n = space.dof_count();
  const int threads = std::clamp(opt.threads, 1, std::max(1, quad.count[1]));
  std::vector<SparseAccumulator> parts;
  parts.reserve(threads);
  for (int t = 0; t < threads; ++t) parts.emplace_back(n, n);
  const double w = quad.weight();
  run_chunks(quad.count[1], threads, [&](int b, int e, int slot) {
    LocalBlock block(parts[slot], form);
    visit_points(space, quad, b, e, [&](const Point3&, const std::vector<BasisTerm>& t) { block.add(w, t); });
  });
  for (int t = 1; t < threads; ++t) parts[0].merge(parts[t]);
  return parts[0].to_csr();
}

}  // namespace

SparseMatrix assemble_laplacian(const DiscreteSpace& space, const QuadratureGrid& quad, AssemblyOptions opt) {
  return assemble_form(space, quad, Form::stiffness, opt);
}

SparseMatrix assemble_mass(const DiscreteSpace& space, const QuadratureGrid& quad, AssemblyOptions opt) {
  return assemble_form(space, quad, Form::mass, opt);
}

namespace {

std::vector<double> integrate_against(const DiscreteSpace& space, const QuadratureGrid& quad,
                                      const std::function<double(const Point3&)>& f, AssemblyOptions opt) {
  const int n = space.dof_count();
  const int threads = std::clamp(opt.threads, 1, std::max(1, quad.count[1]));
  std::vector<std::vector<double>> parts(threads, std::vector<double>(n, 0.0));
  const double w = quad.weight();
  run_chunks(quad.count[1], threads, [&](int b, int e, int slot) {
    std::vector<double>& out = parts[slot];
    visit_points(space, quad, b, e, [&](const Point3& x, const std::vector<BasisTerm>& t) {
      const double fx = w * f(x);
      for (const BasisTerm& term : t) out[term.dof] += fx * term.value;
    });
  });
  for (int t = 1; t < threads; ++t) {
    for (int i = 0; i < n; ++i) parts[0][i] += parts[t][i];
  }
  return std::move(parts[0]);
}

}  // namespace

std::vector<double> assemble_rhs(const DiscreteSpace& space, const QuadratureGrid& quad, const SourceTerm& source,
                                 AssemblyOptions opt) {
  if (const auto* rho = std::get_if<std::function<double(const Point3&)>>(&source.source)) {
    std::vector<double> b = integrate_against(space, quad, *rho, opt);
    for (double& v : b) v = -v;
    return b;
  }
  const auto& curves = std::get<std::vector<FilamentCurve>>(source.source);
  std::vector<double> b(space.dof_count(), 0.0);
  std::vector<BasisTerm> terms;
  for (const FilamentCurve& c : curves) {
    for (const Point3& p : c.points) {
      space.basis_at(p, terms);
      for (const BasisTerm& t : terms) b[t.dof] -= c.sign * c.weight * t.value;
    }
  }
  return b;
}

std::vector<double> basis_integrals(const DiscreteSpace& space, const QuadratureGrid& quad, AssemblyOptions opt) {
  return integrate_against(space, quad, [](const Point3&) { return 1.0; }, opt);
}

// ---------------------------------------------------------------- tensor path

Spline1DMatrices spline_matrices_1d(const Spline1D& axis, int refinement) {
  const int n = axis.n_nodes();
  const int cells = axis.periodic() ? n : n - 1;
  const int count = cells * refinement;
  const double step = axis.spacing() / refinement;
  Spline1DMatrices m{n, std::vector<double>(n * n, 0.0), std::vector<double>(n * n, 0.0)};
  for (int q = 0; q < count; ++q) {
    const BasisWindow w = axis.window(axis.lower() + (q + 0.5) * step);
    for (int a = 0; a < w.count; ++a) {
      const int i = axis.wrap(w.first + a);
      for (int b = 0; b < w.count; ++b) {
        const int j = axis.wrap(w.first + b);
        m.mass[i * n + j] += step * w.value[a] * w.value[b];
        m.stiffness[i * n + j] += step * w.deriv[a] * w.deriv[b];
      }
    }
  }
  return m;
}

namespace {

SparseMatrix kronecker_sum(const std::optional<Spline1D>& r, const Spline1D& z, const Spline1D& zeta,
                           std::array<int, 3> refinement, bool laplacian) {
  Spline1DMatrices mr{1, {1.0}, {0.0}};
  if (r) mr = spline_matrices_1d(*r, refinement[0]);
  const Spline1DMatrices mz = spline_matrices_1d(z, refinement[1]);
  const Spline1DMatrices mk = spline_matrices_1d(zeta, refinement[2]);
  const int nr = mr.n, nz = mz.n, nk = mk.n;
  auto nonzero = [](const Spline1DMatrices& m, int i, int j) {
    return m.mass[i * m.n + j] != 0.0 || m.stiffness[i * m.n + j] != 0.0;
  };
  SparseAccumulator acc(nr * nz * nk, nr * nz * nk);
  for (int k = 0; k < nk; ++k) {
    for (int j = 0; j < nz; ++j) {
      for (int i = 0; i < nr; ++i) {
        const int row = (k * nz + j) * nr + i;
        for (int k2 = 0; k2 < nk; ++k2) {
          if (!nonzero(mk, k, k2)) continue;
          for (int j2 = 0; j2 < nz; ++j2) {
            if (!nonzero(mz, j, j2)) continue;
            for (int i2 = 0; i2 < nr; ++i2) {
              if (!nonzero(mr, i, i2)) continue;
              const double Mr = mr.mass[i * nr + i2], Mz = mz.mass[j * nz + j2], Mk = mk.mass[k * nk + k2];
              double v;
              if (laplacian) {
                v = mr.stiffness[i * nr + i2] * Mz * Mk + Mr * mz.stiffness[j * nz + j2] * Mk +
                    Mr * Mz * mk.stiffness[k * nk + k2];
              } else {
                v = Mr * Mz * Mk;
              }
              acc.add(row, (k2 * nz + j2) * nr + i2, v);
            }
          }
        }
      }
    }
  }
  return acc.to_csr();
}

}  // namespace

SparseMatrix tensor_laplacian(const std::optional<Spline1D>& r, const Spline1D& z, const Spline1D& zeta,
                              std::array<int, 3> refinement) {
  return kronecker_sum(r, z, zeta, refinement, true);
}

SparseMatrix tensor_mass(const std::optional<Spline1D>& r, const Spline1D& z, const Spline1D& zeta,
                         std::array<int, 3> refinement) {
  return kronecker_sum(r, z, zeta, refinement, false);
}

}  // namespace fcifem
