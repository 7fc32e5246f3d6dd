#include "fcifem/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include "fcifem/assembly.hpp"
#include "fcifem/mapping.hpp"
#include "fcifem/representation.hpp"
#include "fcifem/solver.hpp"

namespace fcifem {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

FieldModel make_field(const FieldConfig& f) {
  return f.kind == "straight" ? FieldModel::straight(f.b_z, f.b_zeta) : FieldModel::divertor(f.b0);
}

std::shared_ptr<const Mapping> make_mapping(const std::string& kind, const MappingConfig& mc, const FieldModel& field,
                                            const std::optional<Spline1D>& r, const Spline1D& z,
                                            std::optional<Box2> domain) {
  if (kind == "identity") return std::make_shared<IdentityMapping>(domain);
  if (kind == "analytic_straight") {
    if (field.kind() != FieldKind::straight) throw ConfigError("analytic_straight mapping needs a straight field");
    return std::make_shared<AnalyticStraightMapping>(field, domain);
  }
  if (!r) throw ConfigError("mapping '" + kind + "' needs an R axis");
  if (kind == "exact_ode") return std::make_shared<ExactOdeMapping>(field, domain, mc.tolerance);
  return std::make_shared<TaylorSplineMapping>(build_taylor_mapping(field, *r, z, mc.taylor_order, domain));
}

struct TokamakAxes {
  Spline1D r;
  Spline1D z;
  Spline1D zeta;
};

TokamakAxes tokamak_axes(const ExperimentConfig& cfg, int order, int n_r, int n_z, int n_zeta) {
  const DomainConfig& d = cfg.domain;
  return {Spline1D(order, (d.r_max - d.r_min) / n_r, n_r + 1, SplineBoundary::clamped, d.r_min),
          Spline1D(order, (d.z_max - d.z_min) / n_z, n_z + 1, SplineBoundary::clamped, d.z_min),
          Spline1D(order, d.zeta_period / n_zeta, n_zeta, SplineBoundary::periodic)};
}

BlendedSpace tokamak_space(const ExperimentConfig& cfg, const std::string& mapping_kind, int n_r, int n_z,
                           int n_zeta) {
  const TokamakAxes ax = tokamak_axes(cfg, cfg.order, n_r, n_z, n_zeta);
  const FieldModel field = make_field(cfg.field);
  auto m = make_mapping(mapping_kind, cfg.mapping, field, ax.r, ax.z, cfg.domain.box());
  return BlendedSpace(FcifemSpace(ax.r, ax.z, ax.zeta, std::move(m)));
}

// ---------------------------------------------------------------- solving

struct SolveStats {
  int dofs = 0;
  std::int64_t nnz = 0;
  double mean_row_nnz = 0.0;
  int bandwidth = 0;
  int bandwidth_reordered = 0;
  std::string solver;
  int iterations = 0;
  double relative_residual = 0.0;
  bool used_ldlt = false;

  json to_json() const {
    json j{{"dofs", dofs},
           {"nnz", nnz},
           {"mean_row_nnz", mean_row_nnz},
           {"bandwidth", bandwidth},
           {"bandwidth_reordered", bandwidth_reordered},
           {"solver", solver},
           {"relative_residual", relative_residual}};
    if (solver == "cg") j["iterations"] = iterations;
    if (solver == "direct") j["used_ldlt"] = used_ldlt;
    return j;
  }
};

double relative_residual(const SparseMatrix& a, std::span<const double> x, std::span<const double> b) {
  std::vector<double> r = a.multiply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  const double nb = norm2(b);
  return nb > 0.0 ? norm2(r) / nb : norm2(r);
}

/// Solves a x = b. With `mean_weights`, a is the singular periodic Laplacian
/// with constant null space: b is made consistent and the solution is fixed
/// to zero weighted mean. The direct path pins dof 0 for that case.
std::vector<double> solve_system(const SparseMatrix& a, std::vector<double> b, const SolverConfig& sc,
                                 std::optional<std::span<const double>> mean_weights, SolveStats& st) {
  const int n = a.rows();
  st.dofs = n;
  st.nnz = a.nnz();
  st.mean_row_nnz = a.mean_row_nnz();
  st.bandwidth = a.bandwidth();
  st.solver = sc.kind;
  const std::vector<double> ones(n, 1.0);
  if (mean_weights) project_out(b, ones);
  std::vector<double> x;
  if (sc.kind == "cg") {
    st.bandwidth_reordered = a.permuted(reorder_rcm(a)).bandwidth();
    CgResult r = solve_cg(a, b, sc.tolerance, sc.max_iterations);
    st.iterations = r.iterations;
    x = std::move(r.x);
  } else if (mean_weights) {
    std::vector<int> keep(n - 1);
    for (int i = 1; i < n; ++i) keep[i - 1] = i;
    const SparseMatrix sub = a.submatrix(keep);
    const std::vector<int> perm = reorder_rcm(sub);
    DirectSolveInfo info;
    const std::vector<double> bs(b.begin() + 1, b.end());
    const std::vector<double> xs = solve_direct_banded(sub, bs, perm, &info);
    st.bandwidth_reordered = info.bandwidth;
    st.used_ldlt = info.used_ldlt;
    x.assign(n, 0.0);
    std::copy(xs.begin(), xs.end(), x.begin() + 1);
  } else {
    const std::vector<int> perm = reorder_rcm(a);
    DirectSolveInfo info;
    x = solve_direct_banded(a, b, perm, &info);
    st.bandwidth_reordered = info.bandwidth;
    st.used_ldlt = info.used_ldlt;
  }
  if (mean_weights) fix_mean(x, ones, *mean_weights);
  st.relative_residual = relative_residual(a, x, b);
  return x;
}

// ---------------------------------------------------------------- sampling

/// Cell-centred sample grid: count[a] points of width step[a] from lower[a].
struct CellGrid {
  std::array<double, 3> lower{};
  std::array<double, 3> step{1.0, 1.0, 1.0};
  std::array<int, 3> count{1, 1, 1};

  Point3 point(int a, int b, int c) const {
    return {lower[0] + (a + 0.5) * step[0], lower[1] + (b + 0.5) * step[1], lower[2] + (c + 0.5) * step[2]};
  }
  long long size() const { return 1LL * count[0] * count[1] * count[2]; }
};

CellGrid cell_grid(const DomainConfig& d, bool has_r, std::array<int, 3> count) {
  CellGrid g;
  g.count = count;
  if (has_r) {
    g.lower[0] = d.r_min;
    g.step[0] = (d.r_max - d.r_min) / count[0];
  } else {
    g.count[0] = 1;
    g.step[0] = 0.0;
    g.lower[0] = -0.5 * g.step[0];
  }
  g.lower[1] = d.z_min;
  g.step[1] = (d.z_max - d.z_min) / count[1];
  g.lower[2] = 0.0;
  g.step[2] = d.zeta_period / count[2];
  return g;
}

/// Runs body(i) for i in [0, n) on `threads` workers in contiguous blocks.
template <class Body>
void parallel_for(int n, int threads, Body&& body) {
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = static_cast<int>(1LL * n * w / workers); i < static_cast<int>(1LL * n * (w + 1) / workers); ++i) {
          body(i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double evaluate_at(const DiscreteSpace& space, std::span<const double> x, const Point3& p,
                   std::vector<BasisTerm>& scratch) {
  space.basis_at(p, scratch);
  double v = 0.0;
  for (const BasisTerm& t : scratch) v += x[t.dof] * t.value;
  return v;
}

/// Values of the discrete field at every point of `g` (R fastest, zeta slowest).
std::vector<double> sample_field(const DiscreteSpace& space, std::span<const double> x, const CellGrid& g,
                                 int threads) {
  std::vector<double> out(g.size());
  const int planes = g.count[1] * g.count[2];
  parallel_for(planes, threads, [&](int row) {
    std::vector<BasisTerm> scratch;
    const int b = row % g.count[1];
    const int c = row / g.count[1];
    for (int a = 0; a < g.count[0]; ++a) {
      out[(1LL * c * g.count[1] + b) * g.count[0] + a] = evaluate_at(space, x, g.point(a, b, c), scratch);
    }
  });
  return out;
}

double rms(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return v.empty() ? 0.0 : std::sqrt(s / v.size());
}

double rms_difference(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return a.empty() ? 0.0 : std::sqrt(s / a.size());
}

double max_abs_difference(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------- output

std::filesystem::path prepare_output(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << std::setprecision(17);
    for (std::size_t n = 0; n < columns.size(); ++n) out_ << (n ? "," : "") << columns[n];
    out_ << '\n';
  }
  template <class... T>
  void row(const T&... values) {
    int n = 0;
    ((out_ << (n++ ? "," : "") << values), ...);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

void check_finite(const json& j, const std::string& path) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) {
    throw std::runtime_error("non-finite metric '" + path + "'");
  }
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) check_finite(v, path.empty() ? k : path + "." + k);
  }
  if (j.is_array()) {
    for (std::size_t n = 0; n < j.size(); ++n) check_finite(j[n], path + "." + std::to_string(n));
  }
}

json fit_json(const LogLogFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"residual", f.residual}, {"points", f.points}};
}

/// y on the piecewise-linear log-log curve through (x, y) at xq; nullopt outside [x_0, x_last].
std::optional<double> loglog_interpolate(std::span<const double> x, std::span<const double> y, double xq) {
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    if (xq >= x[i] && xq <= x[i + 1]) {
      const double t = std::log(xq / x[i]) / std::log(x[i + 1] / x[i]);
      return std::exp((1.0 - t) * std::log(y[i]) + t * std::log(y[i + 1]));
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- periodic 2D

struct PeriodicPoint {
  int n_z = 0;
  int n_zeta = 0;
  double l2_error = 0.0;
  double relative_l2_error = 0.0;
  double max_error = 0.0;
  SolveStats stats;
  double seconds = 0.0;
};

void check_periodic_domain(const DomainConfig& d) {
  const double two_pi = 2 * std::numbers::pi;
  if (std::abs(d.z_max - d.z_min - two_pi) > 1e-12 || std::abs(d.zeta_period - two_pi) > 1e-12) {
    throw ConfigError("the Fourier oracle needs Z and zeta periods of 2 pi");
  }
}

PeriodicPoint solve_periodic(const ExperimentConfig& cfg, int order, const std::string& mapping_kind, int n_z,
                             int n_zeta) {
  const auto t0 = Clock::now();
  const DomainConfig& d = cfg.domain;
  const Spline1D z(order, (d.z_max - d.z_min) / n_z, n_z, SplineBoundary::periodic, d.z_min);
  const Spline1D zeta(order, d.zeta_period / n_zeta, n_zeta, SplineBoundary::periodic);
  const FieldModel field = make_field(cfg.field);
  const FcifemSpace space(std::nullopt, z, zeta, make_mapping(mapping_kind, cfg.mapping, field, std::nullopt, z, {}));
  const int ref = cfg.quadrature_refinement;
  const QuadratureGrid quad = QuadratureGrid::for_space(space, {1, ref, ref});
  const AssemblyOptions opt{cfg.threads};
  const FourierSolution exact = fourier_oracle_2d(aligned_wave_modes(cfg.periodic2d.wave_number));
  const SparseMatrix k = assemble_laplacian(space, quad, opt);
  std::vector<double> b =
      assemble_rhs(space, quad, SourceTerm::analytic([&](const Point3& p) { return exact.rho(p.z, p.zeta); }), opt);
  const std::vector<double> weights = basis_integrals(space, quad, opt);
  PeriodicPoint pt;
  pt.n_z = n_z;
  pt.n_zeta = n_zeta;
  const std::vector<double> x = solve_system(k, std::move(b), cfg.solver, weights, pt.stats);
  const int ns = cfg.sample_oversampling * std::max(n_z, n_zeta);
  const CellGrid g = cell_grid(d, false, {1, ns, ns});
  const std::vector<double> num = sample_field(space, x, g, cfg.threads);
  std::vector<double> ref_values(num.size());
  for (int c = 0; c < ns; ++c) {
    for (int bb = 0; bb < ns; ++bb) {
      const Point3 p = g.point(0, bb, c);
      ref_values[1LL * c * ns + bb] = exact.phi(p.z, p.zeta);
    }
  }
  pt.l2_error = rms_difference(num, ref_values);
  pt.relative_l2_error = pt.l2_error / rms(ref_values);
  pt.max_error = max_abs_difference(num, ref_values);
  pt.seconds = seconds_since(t0);
  return pt;
}

json periodic_point_json(const PeriodicPoint& p) {
  return {{"n_z", p.n_z},
          {"n_zeta", p.n_zeta},
          {"dofs", p.stats.dofs},
          {"l2_error", p.l2_error},
          {"relative_l2_error", p.relative_l2_error},
          {"max_error", p.max_error},
          {"matrix", p.stats.to_json()}};
}

// ---------------------------------------------------------------- filament

struct FilamentSolution {
  std::optional<BlendedSpace> space;
  std::vector<double> rho_bar;
  std::vector<double> phi;
  SolveStats stiffness_stats;
  SolveStats mass_stats;
};

FilamentSolution solve_filament(const ExperimentConfig& cfg, const SourceTerm& source, const std::string& mapping_kind,
                                int n_r, int n_z, int n_zeta, bool project, json& timings, const std::string& tag) {
  auto t0 = Clock::now();
  FilamentSolution s;
  s.space.emplace(tokamak_space(cfg, mapping_kind, n_r, n_z, n_zeta));
  const BlendedSpace& space = *s.space;
  const QuadratureGrid quad = QuadratureGrid::for_space(space.fcifem(), cfg.quadrature_refinement);
  const AssemblyOptions opt{cfg.threads};
  const SparseMatrix k = assemble_laplacian(space, quad, opt);
  timings[tag + "_stiffness_assembly"] = seconds_since(t0);
  t0 = Clock::now();
  const std::vector<double> b = assemble_rhs(space, quad, source, opt);
  timings[tag + "_rhs"] = seconds_since(t0);
  if (project) {
    t0 = Clock::now();
    const SparseMatrix m = assemble_mass(space, quad, opt);
    timings[tag + "_mass_assembly"] = seconds_since(t0);
    // b carries the minus sign of the weak Laplacian; the projection solves M rho_bar = -b.
    std::vector<double> minus_b(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) minus_b[i] = -b[i];
    t0 = Clock::now();
    s.rho_bar = solve_system(m, std::move(minus_b), cfg.solver, std::nullopt, s.mass_stats);
    timings[tag + "_projection_solve"] = seconds_since(t0);
  }
  t0 = Clock::now();
  s.phi = solve_system(k, b, cfg.solver, std::nullopt, s.stiffness_stats);
  timings[tag + "_solve"] = seconds_since(t0);
  return s;
}

Point2 trace_to(const FieldModel& field, const Point3& start, double zeta, double tol) {
  if (zeta == start.zeta) return {start.r, start.z};
  return trace_field_line(field, start, zeta, tol).end;
}

void write_field(const std::filesystem::path& path, const SampleGrid& grid, const DiscreteSpace& space,
                 std::span<const double> x) {
  std::vector<BasisTerm> scratch;
  write_field_csv(path.string(), grid, [&](const Point3& p) { return evaluate_at(space, x, p, scratch); });
}

SampleGrid export_grid_3d(const FcifemSpace& space, int zeta_samples) {
  SampleGrid g = SampleGrid::for_space(space, 1);
  g.step[2] = space.zeta_axis().length() / zeta_samples;
  g.shape[2] = zeta_samples;
  return g;
}

}  // namespace

// ---------------------------------------------------------------- fits

LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_loglog: need two or more points");
  const int n = static_cast<int>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("fit_loglog: values must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom <= 0.0) throw std::invalid_argument("fit_loglog: x values must differ");
  LogLogFit f;
  f.points = n;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double r2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = std::log(y[i]) - (f.intercept + f.slope * std::log(x[i]));
    r2 += r * r;
  }
  f.residual = std::sqrt(r2 / n);
  return f;
}

double loglog_crossing(std::span<const double> x, std::span<const double> y, double target, bool* extrapolated) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_crossing: need two or more points");
  const std::size_t n = x.size();
  std::size_t seg = n - 2;
  bool outside = true;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if ((target <= y[i] && target >= y[i + 1]) || (target >= y[i] && target <= y[i + 1])) {
      seg = i;
      outside = false;
      break;
    }
  }
  if (outside && target > y[0]) seg = 0;
  if (extrapolated) *extrapolated = outside;
  const double ly0 = std::log(y[seg]), ly1 = std::log(y[seg + 1]);
  if (ly0 == ly1) throw std::runtime_error("loglog_crossing: flat segment");
  const double t = (std::log(target) - ly0) / (ly1 - ly0);
  return std::exp((1.0 - t) * std::log(x[seg]) + t * std::log(x[seg + 1]));
}

// ---------------------------------------------------------------- runners

json RunResult::result_json() const {
  json artifacts_json = artifacts;
  return {{"format", "fcifem-result"},
          {"version", 1},
          {"problem", config.at("problem")},
          {"config", config},
          {"metrics", metrics},
          {"artifacts", artifacts_json}};
}

RunResult run_periodic2d(const ExperimentConfig& cfg) {
  check_periodic_domain(cfg.domain);
  const auto t_all = Clock::now();
  const auto dir = prepare_output(cfg);
  RunResult res;
  res.config = cfg.to_json();
  CsvWriter csv(dir / "periodic2d_scan.csv", {"series", "order", "mapping", "n_z", "n_zeta", "dofs", "l2_error",
                                              "relative_l2_error", "max_error", "mean_row_nnz", "iterations"});
  res.artifacts.push_back("periodic2d_scan.csv");
  json series_json = json::array();
  std::vector<std::vector<PeriodicPoint>> all;
  for (const SeriesConfig& s : cfg.periodic2d.series) {
    std::vector<PeriodicPoint> pts;
    std::vector<double> nz, err;
    json points = json::array();
    for (int n : s.n_z) {
      const int n_zeta = n * s.zeta_ratio[0] / s.zeta_ratio[1];
      const PeriodicPoint p = solve_periodic(cfg, s.order, s.mapping, n, n_zeta);
      res.timings[s.label + "_n" + std::to_string(n)] = p.seconds;
      csv.row(s.label, s.order, s.mapping, p.n_z, p.n_zeta, p.stats.dofs, p.l2_error, p.relative_l2_error,
              p.max_error, p.stats.mean_row_nnz, p.stats.iterations);
      points.push_back(periodic_point_json(p));
      nz.push_back(n);
      err.push_back(p.l2_error);
      pts.push_back(p);
    }
    series_json.push_back({{"label", s.label},
                           {"order", s.order},
                           {"mapping", s.mapping},
                           {"zeta_ratio", s.zeta_ratio},
                           {"points", points},
                           {"fit", fit_json(fit_loglog(nz, err))}});
    all.push_back(std::move(pts));
  }
  // Node alignment: series of equal order and mapping but different zeta
  // ratios, compared at the N_Z values of the first series that fall inside
  // the second one's range.
  json alignment = json::array();
  const auto& series = cfg.periodic2d.series;
  for (std::size_t a = 0; a < series.size(); ++a) {
    for (std::size_t b = a + 1; b < series.size(); ++b) {
      if (series[a].order != series[b].order || series[a].mapping != series[b].mapping ||
          series[a].zeta_ratio == series[b].zeta_ratio) {
        continue;
      }
      std::vector<double> nb, eb;
      for (const PeriodicPoint& p : all[b]) {
        nb.push_back(p.n_z);
        eb.push_back(p.l2_error);
      }
      json cmp = json::array();
      double worst = 1.0;
      for (const PeriodicPoint& p : all[a]) {
        const std::optional<double> other = loglog_interpolate(nb, eb, p.n_z);
        if (!other) continue;
        const double ratio = p.l2_error / *other;
        worst = std::max(worst, std::max(ratio, 1.0 / ratio));
        cmp.push_back({{"n_z", p.n_z}, {"error_a", p.l2_error}, {"error_b_interpolated", *other}, {"ratio", ratio}});
      }
      if (cmp.empty()) continue;
      alignment.push_back(
          {{"series_a", series[a].label}, {"series_b", series[b].label}, {"points", cmp}, {"worst_factor", worst}});
    }
  }
  res.metrics = {{"series", series_json}, {"node_alignment", alignment}};
  res.timings["total"] = seconds_since(t_all);
  check_finite(res.metrics, "metrics");
  return res;
}

namespace {

RunResult cartesian_periodic(const ExperimentConfig& cfg) {
  check_periodic_domain(cfg.domain);
  const auto t_all = Clock::now();
  const auto dir = prepare_output(cfg);
  RunResult res;
  res.config = cfg.to_json();
  const auto& c = cfg.cartesian;
  const int n_zeta = c.fcifem_n_z * c.zeta_ratio[0] / c.zeta_ratio[1];
  const PeriodicPoint fci = solve_periodic(cfg, cfg.order, cfg.mapping.kind, c.fcifem_n_z, n_zeta);
  res.timings["fcifem"] = fci.seconds;
  CsvWriter csv(dir / "cartesian_scan.csv", {"kind", "n_z", "n_zeta", "dofs", "l2_error", "relative_l2_error"});
  res.artifacts.push_back("cartesian_scan.csv");
  csv.row("fcifem", fci.n_z, fci.n_zeta, fci.stats.dofs, fci.l2_error, fci.relative_l2_error);
  std::vector<int> scan = cfg.scan;
  std::sort(scan.begin(), scan.end());
  std::vector<double> dofs, err;
  json points = json::array();
  for (int n : scan) {
    const PeriodicPoint p = solve_periodic(cfg, cfg.order, "identity", n, n);
    res.timings["cartesian_n" + std::to_string(n)] = p.seconds;
    csv.row("cartesian", p.n_z, p.n_zeta, p.stats.dofs, p.l2_error, p.relative_l2_error);
    points.push_back(periodic_point_json(p));
    dofs.push_back(p.stats.dofs);
    err.push_back(p.l2_error);
  }
  bool extrapolated = false;
  const double matched = loglog_crossing(dofs, err, fci.l2_error, &extrapolated);
  res.metrics = {{"target", "periodic2d"},
                 {"fcifem", periodic_point_json(fci)},
                 {"cartesian", points},
                 {"cartesian_fit", fit_json(fit_loglog(dofs, err))},
                 {"matched_cartesian_dofs", matched},
                 {"matched_cartesian_n", std::sqrt(matched)},
                 {"matched_extrapolated", extrapolated},
                 {"dof_ratio", matched / fci.stats.dofs}};
  res.timings["total"] = seconds_since(t_all);
  check_finite(res.metrics, "metrics");
  return res;
}

RunResult cartesian_filament(const ExperimentConfig& cfg) {
  const auto t_all = Clock::now();
  const auto dir = prepare_output(cfg);
  RunResult res;
  res.config = cfg.to_json();
  const FieldModel field = make_field(cfg.field);
  const SourceTerm source = make_filament_source(field, cfg.filament.start, cfg.domain.zeta_period,
                                                 cfg.filament.samples, cfg.domain.box(), cfg.mapping.tolerance);
  const GridConfig& g = cfg.grid;
  FilamentSolution fci = solve_filament(cfg, source, cfg.mapping.kind, g.n_r, g.n_z, g.n_zeta, false, res.timings,
                                        "fcifem");
  FilamentSolution cart = solve_filament(cfg, source, "identity", g.n_r, g.n_z, cfg.cartesian.n_zeta_3d, false,
                                         res.timings, "cartesian");
  const int os = cfg.sample_oversampling;
  const CellGrid cg = cell_grid(cfg.domain, true, {os * g.n_r, os * g.n_z, os * std::max(g.n_zeta, cfg.cartesian.n_zeta_3d)});
  const std::vector<double> a = sample_field(*fci.space, fci.phi, cg, cfg.threads);
  const std::vector<double> b = sample_field(*cart.space, cart.phi, cg, cfg.threads);
  res.metrics = {{"target", "tokamak_filament"},
                 {"fcifem_matrix", fci.stiffness_stats.to_json()},
                 {"cartesian_matrix", cart.stiffness_stats.to_json()},
                 {"dof_ratio", static_cast<double>(cart.stiffness_stats.dofs) / fci.stiffness_stats.dofs},
                 {"relative_rms_difference", rms_difference(a, b) / rms(a)}};
  if (cfg.filament.export_fields) {
    write_field(dir / "cartesian_phi_slice.csv", SampleGrid::for_space(cart.space->fcifem(), 3, true), *cart.space,
                cart.phi);
    write_field(dir / "cartesian_phi_3d.csv", export_grid_3d(cart.space->fcifem(), cfg.filament.export_zeta_samples),
                *cart.space, cart.phi);
    write_field(dir / "fcifem_phi_3d.csv", export_grid_3d(fci.space->fcifem(), cfg.filament.export_zeta_samples),
                *fci.space, fci.phi);
    res.artifacts.insert(res.artifacts.end(), {"cartesian_phi_slice.csv", "cartesian_phi_3d.csv", "fcifem_phi_3d.csv"});
  }
  res.timings["total"] = seconds_since(t_all);
  check_finite(res.metrics, "metrics");
  return res;
}

}  // namespace

RunResult run_cartesian_compare(const ExperimentConfig& cfg) {
  return cfg.cartesian.target == "periodic2d" ? cartesian_periodic(cfg) : cartesian_filament(cfg);
}

RunResult run_tokamak_convergence(const ExperimentConfig& cfg) {
  const auto t_all = Clock::now();
  const auto dir = prepare_output(cfg);
  RunResult res;
  res.config = cfg.to_json();
  const DomainConfig& d = cfg.domain;
  const double lr = d.r_max - d.r_min, lz = d.z_max - d.z_min;
  const double pi = std::numbers::pi;
  const double k2 = pi * pi / (lr * lr) + pi * pi / (lz * lz);
  auto rho = [&](const Point3& p) { return std::sin(pi * (p.r - d.r_min) / lr) * std::sin(pi * (p.z - d.z_min) / lz); };
  const bool analytic = cfg.convergence.reference == "analytic";

  std::vector<int> scan = cfg.scan;
  std::sort(scan.begin(), scan.end());
  const int h_max = scan.back();
  const int os = cfg.sample_oversampling;
  const GridConfig& g = cfg.grid;
  const CellGrid grid = cell_grid(d, true, {os * g.n_r * h_max, os * g.n_z * h_max, os * g.n_zeta * h_max});

  // Random boundary points (the only seeded randomness).
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point3> boundary(cfg.convergence.boundary_samples);
  for (std::size_t n = 0; n < boundary.size(); ++n) {
    const int face = static_cast<int>(n % 4);
    const double t = unit(rng), zeta = d.zeta_period * unit(rng);
    const double r = d.r_min + t * lr, z = d.z_min + t * lz;
    boundary[n] = face == 0   ? Point3{d.r_min, z, zeta}
                  : face == 1 ? Point3{d.r_max, z, zeta}
                  : face == 2 ? Point3{r, d.z_min, zeta}
                              : Point3{r, d.z_max, zeta};
  }

  struct Level {
    int h = 0;
    std::vector<double> samples;
    SolveStats stats;
    double boundary_max = 0.0;
  };
  auto solve_level = [&](int h) {
    Level lv;
    lv.h = h;
    auto t0 = Clock::now();
    const BlendedSpace space = tokamak_space(cfg, cfg.mapping.kind, g.n_r * h, g.n_z * h, g.n_zeta * h);
    const QuadratureGrid quad = QuadratureGrid::for_space(space.fcifem(), cfg.quadrature_refinement);
    const AssemblyOptions opt{cfg.threads};
    const SparseMatrix k = assemble_laplacian(space, quad, opt);
    std::vector<double> b = assemble_rhs(space, quad, SourceTerm::analytic(rho), opt);
    res.timings["assembly_h" + std::to_string(h)] = seconds_since(t0);
    t0 = Clock::now();
    const std::vector<double> x = solve_system(k, std::move(b), cfg.solver, std::nullopt, lv.stats);
    res.timings["solve_h" + std::to_string(h)] = seconds_since(t0);
    t0 = Clock::now();
    lv.samples = sample_field(space, x, grid, cfg.threads);
    std::vector<BasisTerm> scratch;
    for (const Point3& p : boundary) lv.boundary_max = std::max(lv.boundary_max, std::abs(evaluate_at(space, x, p, scratch)));
    res.timings["sampling_h" + std::to_string(h)] = seconds_since(t0);
    return lv;
  };

  std::vector<double> reference(grid.size());
  if (analytic) {
    for (int c = 0; c < grid.count[2]; ++c) {
      for (int b = 0; b < grid.count[1]; ++b) {
        for (int a = 0; a < grid.count[0]; ++a) {
          reference[(1LL * c * grid.count[1] + b) * grid.count[0] + a] = -rho(grid.point(a, b, c)) / k2;
        }
      }
    }
  }
  json reference_json = {{"kind", cfg.convergence.reference}};
  if (analytic) {
    reference_json["k_squared"] = k2;
  } else {
    const Level ref = solve_level(cfg.convergence.reference_scale);
    reference = ref.samples;
    reference_json["scale"] = ref.h;
    reference_json["matrix"] = ref.stats.to_json();
  }

  CsvWriter csv(dir / "convergence.csv", {"h", "n_r", "n_z", "n_zeta", "dofs", "l2_error", "relative_l2_error",
                                          "max_error", "boundary_max_abs", "mean_row_nnz", "bandwidth",
                                          "bandwidth_reordered"});
  res.artifacts.push_back("convergence.csv");
  const double ref_rms = rms(reference);
  std::vector<Level> levels;
  std::vector<double> hs, errs;
  json points = json::array();
  double boundary_max = 0.0;
  for (int h : scan) {
    Level lv = solve_level(h);
    const double e = rms_difference(lv.samples, reference);
    const double emax = max_abs_difference(lv.samples, reference);
    boundary_max = std::max(boundary_max, lv.boundary_max);
    csv.row(h, g.n_r * h, g.n_z * h, g.n_zeta * h, lv.stats.dofs, e, e / ref_rms, emax, lv.boundary_max,
            lv.stats.mean_row_nnz, lv.stats.bandwidth, lv.stats.bandwidth_reordered);
    points.push_back({{"h", h},
                      {"grid", {g.n_r * h, g.n_z * h, g.n_zeta * h}},
                      {"l2_error", e},
                      {"relative_l2_error", e / ref_rms},
                      {"max_error", emax},
                      {"boundary_max_abs", lv.boundary_max},
                      {"matrix", lv.stats.to_json()}});
    hs.push_back(h);
    errs.push_back(e);
    levels.push_back(std::move(lv));
  }
  const LogLogFit fit = fit_loglog(hs, errs);
  json local = json::array();
  for (std::size_t i = 0; i + 1 < hs.size(); ++i) {
    local.push_back({{"h_from", hs[i]},
                     {"h_to", hs[i + 1]},
                     {"error_ratio", errs[i] / errs[i + 1]},
                     {"order", std::log(errs[i] / errs[i + 1]) / std::log(hs[i + 1] / hs[i])}});
  }
  json metrics = {{"reference", reference_json},
                  {"points", points},
                  {"fit", fit_json(fit)},
                  {"exponent", -fit.slope},
                  {"local_orders", local},
                  {"boundary_max_abs", boundary_max}};
  // Richardson-style check from successive solution differences, independent
  // of the reference: d_i = |u_i - u_{i+1}| behaves like H_i^-p - H_{i+1}^-p.
  if (levels.size() >= 3) {
    const std::size_t n = levels.size();
    const double d1 = rms_difference(levels[n - 3].samples, levels[n - 2].samples);
    const double d2 = rms_difference(levels[n - 2].samples, levels[n - 1].samples);
    const double h1 = hs[n - 3], h2 = hs[n - 2], h3 = hs[n - 1];
    auto model = [&](double p) {
      return (std::pow(h1, -p) - std::pow(h2, -p)) / (std::pow(h2, -p) - std::pow(h3, -p));
    };
    const double target = d1 / d2;
    double lo = 0.05, hi = 12.0;
    if (target > model(lo) && target < model(hi)) {
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (model(mid) < target ? lo : hi) = mid;
      }
      metrics["richardson_order"] = 0.5 * (lo + hi);
    } else {
      metrics["richardson_order"] = nullptr;
    }
    metrics["successive_differences"] = {d1, d2};
  }
  res.metrics = std::move(metrics);
  res.timings["total"] = seconds_since(t_all);
  check_finite(res.metrics, "metrics");
  return res;
}

RunResult run_tokamak_filament(const ExperimentConfig& cfg) {
  const auto t_all = Clock::now();
  const auto dir = prepare_output(cfg);
  RunResult res;
  res.config = cfg.to_json();
  const FieldModel field = make_field(cfg.field);
  const DomainConfig& d = cfg.domain;
  const GridConfig& g = cfg.grid;
  const auto& fc = cfg.filament;
  const double tol = cfg.mapping.tolerance;
  const SourceTerm source = make_filament_source(field, fc.start, d.zeta_period, fc.samples, d.box(), tol);

  FilamentSolution primary = solve_filament(cfg, source, cfg.mapping.kind, g.n_r, g.n_z, g.n_zeta, true, res.timings,
                                         cfg.mapping.kind);
  const BlendedSpace& space = *primary.space;
  const double hr = space.fcifem().r_axis().spacing(), hz = space.fcifem().z_axis().spacing();
  json metrics = {{"mapping", cfg.mapping.kind},
                  {"stiffness_matrix", primary.stiffness_stats.to_json()},
                  {"mass_matrix", primary.mass_stats.to_json()}};

  // RMS (R, Z) displacement of exact field lines from the node grid over one period.
  {
    const auto t0 = Clock::now();
    double sum = 0.0;
    int count = 0;
    for (int j = 0; j <= g.n_z; ++j) {
      for (int i = 0; i <= g.n_r; ++i) {
        const Point3 seed{d.r_min + i * hr, d.z_min + j * hz, 0.0};
        const TraceResult t = trace_field_line(field, seed, d.zeta_period, tol, d.box().expanded(0.2), d.box());
        if (t.exited || !t.stayed_in_domain) continue;
        const double dr = t.end.r - seed.r, dz = t.end.z - seed.z;
        sum += dr * dr + dz * dz;
        ++count;
      }
    }
    const double disp = count ? std::sqrt(sum / count) : 0.0;
    metrics["displacement"] = {{"rms", disp},
                               {"rms_cells", disp / std::sqrt(hr * hz)},
                               {"seeds_surviving", count},
                               {"seeds_total", (g.n_r + 1) * (g.n_z + 1)}};
    res.timings["displacement"] = seconds_since(t0);
  }

  // Location of max |rho_bar| against both filament curves at sampled zeta.
  {
    const auto t0 = Clock::now();
    const int os = cfg.sample_oversampling;
    const int nr = os * g.n_r + 1, nz = os * g.n_z + 1;
    CsvWriter csv(dir / "filament_alignment.csv",
                  {"zeta", "max_r", "max_z", "rho_bar", "plus_r", "plus_z", "minus_r", "minus_z", "distance_cells"});
    res.artifacts.push_back("filament_alignment.csv");
    json samples = json::array();
    double worst = 0.0;
    for (int l = 0; l < fc.alignment_zeta_samples; ++l) {
      const double zeta = fc.start.zeta + d.zeta_period * l / fc.alignment_zeta_samples;
      std::vector<double> values(1LL * nr * nz);
      parallel_for(nz, cfg.threads, [&](int b) {
        std::vector<BasisTerm> scratch;
        for (int a = 0; a < nr; ++a) {
          const Point3 p{std::min(d.r_min + a * hr / os, d.r_max), std::min(d.z_min + b * hz / os, d.z_max), zeta};
          values[1LL * b * nr + a] = evaluate_at(space, primary.rho_bar, p, scratch);
        }
      });
      std::size_t best = 0;
      for (std::size_t n = 1; n < values.size(); ++n) {
        if (std::abs(values[n]) > std::abs(values[best])) best = n;
      }
      const double mr = std::min(d.r_min + (best % nr) * hr / os, d.r_max);
      const double mz = std::min(d.z_min + (best / nr) * hz / os, d.z_max);
      double back = zeta - 0.5 * d.zeta_period;
      if (back < fc.start.zeta) back += d.zeta_period;
      const Point2 plus = trace_to(field, fc.start, zeta, tol);
      const Point2 minus = trace_to(field, fc.start, back, tol);
      const double dist = std::min(std::hypot((mr - plus.r) / hr, (mz - plus.z) / hz),
                                   std::hypot((mr - minus.r) / hr, (mz - minus.z) / hz));
      worst = std::max(worst, dist);
      csv.row(zeta, mr, mz, values[best], plus.r, plus.z, minus.r, minus.z, dist);
      samples.push_back({{"zeta", zeta}, {"max_location", {mr, mz}}, {"distance_cells", dist}});
    }
    metrics["alignment"] = {{"samples", samples}, {"max_distance_cells", worst}};
    res.timings["alignment"] = seconds_since(t0);
  }

  const int os = cfg.sample_oversampling;
  const CellGrid cg = cell_grid(d, true, {os * g.n_r, os * g.n_z, os * g.n_zeta});
  const std::vector<double> phi_samples = sample_field(space, primary.phi, cg, cfg.threads);
  const std::vector<double> rho_samples = sample_field(space, primary.rho_bar, cg, cfg.threads);
  metrics["phi"] = {{"rms", rms(phi_samples)}};
  metrics["rho_bar"] = {{"rms", rms(rho_samples)}};

  if (fc.compare_exact && cfg.mapping.kind != "exact_ode") {
    FilamentSolution ex =
        solve_filament(cfg, source, "exact_ode", g.n_r, g.n_z, g.n_zeta, false, res.timings, "exact_ode");
    const auto t0 = Clock::now();
    const std::vector<double> ex_samples = sample_field(*ex.space, ex.phi, cg, cfg.threads);
    metrics["exact_comparison"] = {{"relative_rms_difference", rms_difference(phi_samples, ex_samples) / rms(ex_samples)},
                                   {"exact_matrix", ex.stiffness_stats.to_json()}};
    res.timings["exact_sampling"] = seconds_since(t0);
    if (fc.export_fields) {
      write_field(dir / "phi_exact_slice.csv", SampleGrid::for_space(ex.space->fcifem(), 3, true), *ex.space, ex.phi);
      res.artifacts.push_back("phi_exact_slice.csv");
    }
  }

  if (fc.identity_sparsity) {
    const auto t0 = Clock::now();
    const BlendedSpace id = tokamak_space(cfg, "identity", g.n_r, g.n_z, g.n_zeta);
    const SparseMatrix k = assemble_laplacian(id, QuadratureGrid::for_space(id.fcifem(), cfg.quadrature_refinement),
                                              AssemblyOptions{cfg.threads});
    metrics["identity_matrix"] = {{"mean_row_nnz", k.mean_row_nnz()}, {"nnz", k.nnz()}, {"bandwidth", k.bandwidth()}};
    res.timings["identity_assembly"] = seconds_since(t0);
  }

  if (fc.export_fields) {
    const auto t0 = Clock::now();
    const SampleGrid slice = SampleGrid::for_space(space.fcifem(), 3, true);
    write_field(dir / "rho_bar_slice.csv", slice, space, primary.rho_bar);
    write_field(dir / "phi_slice.csv", slice, space, primary.phi);
    const SampleGrid vol = export_grid_3d(space.fcifem(), fc.export_zeta_samples);
    write_field(dir / "rho_bar_3d.csv", vol, space, primary.rho_bar);
    write_field(dir / "phi_3d.csv", vol, space, primary.phi);
    CsvWriter curve(dir / "filament_curve.csv", {"curve", "zeta", "r", "z"});
    for (const FilamentCurve& c : std::get<std::vector<FilamentCurve>>(source.source)) {
      for (const Point3& p : c.points) curve.row(c.sign > 0 ? "plus" : "minus", p.zeta, p.r, p.z);
    }
    res.artifacts.insert(res.artifacts.end(),
                         {"rho_bar_slice.csv", "phi_slice.csv", "rho_bar_3d.csv", "phi_3d.csv", "filament_curve.csv"});
    res.timings["export"] = seconds_since(t0);
  }
  res.metrics = std::move(metrics);
  res.timings["total"] = seconds_since(t_all);
  check_finite(res.metrics, "metrics");
  return res;
}

RunResult run_mapping_error(const ExperimentConfig& cfg) {
  const auto t_all = Clock::now();
  const auto dir = prepare_output(cfg);
  RunResult res;
  res.config = cfg.to_json();
  const FieldModel field = make_field(cfg.field);
  const DomainConfig& d = cfg.domain;
  const GridConfig& g = cfg.grid;
  const TokamakAxes ax = tokamak_axes(cfg, cfg.order, g.n_r, g.n_z, g.n_zeta);
  const auto approx = make_mapping(cfg.mapping.kind, cfg.mapping, field, ax.r, ax.z, d.box());
  const ExactOdeMapping exact(field, d.box(), cfg.mapping.tolerance);
  std::vector<Point3> seeds;
  for (int j = 0; j <= g.n_z; ++j) {
    for (int i = 0; i <= g.n_r; ++i) seeds.push_back({ax.r.node(i), ax.z.node(j), 0.0});
  }
  const MappingErrorReport rep = mapping_error_report(*approx, exact, seeds, d.zeta_period);

  CsvWriter csv(dir / "mapping_error.csv",
                {"seed_r", "seed_z", "survived", "exact_r", "exact_z", "approx_r", "approx_z", "error", "grad_a"});
  res.artifacts.push_back("mapping_error.csv");
  struct Survivor {
    double error, grad, z;
  };
  std::vector<Survivor> survivors;
  for (const SeedError& s : rep.per_seed) {
    const Point2 ga = field.flux_gradient(s.seed.r, s.seed.z);
    const double grad = std::hypot(ga.r, ga.z);
    csv.row(s.seed.r, s.seed.z, s.survived ? 1 : 0, s.exact.r, s.exact.z, s.approx.r, s.approx.z, s.error, grad);
    if (s.survived) survivors.push_back({s.error, grad, s.seed.z});
  }
  // Where the largest errors sit: mean |grad A| and the share of seeds in the
  // top or bottom quarter of the Z range, for the top decile and for all seeds.
  std::sort(survivors.begin(), survivors.end(), [](const Survivor& a, const Survivor& b) { return a.error > b.error; });
  const std::size_t decile = std::max<std::size_t>(1, survivors.size() / 10);
  const double lz = d.z_max - d.z_min;
  auto summarize = [&](std::size_t n) {
    double grad = 0.0;
    int edge = 0;
    for (std::size_t k = 0; k < n; ++k) {
      grad += survivors[k].grad;
      if (survivors[k].z < d.z_min + 0.25 * lz || survivors[k].z > d.z_max - 0.25 * lz) ++edge;
    }
    return json{{"count", n}, {"mean_grad_a", grad / n}, {"fraction_near_z_boundary", static_cast<double>(edge) / n}};
  };
  res.metrics = {{"mapping", approx->kind()},
                 {"rms", rep.rms},
                 {"max", rep.max},
                 {"seeds", seeds.size()},
                 {"survivors", rep.survivors},
                 {"top_decile", summarize(decile)},
                 {"all_survivors", summarize(survivors.size())}};
  res.timings["total"] = seconds_since(t_all);
  check_finite(res.metrics, "metrics");
  return res;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.problem == "periodic2d") return run_periodic2d(cfg);
  if (cfg.problem == "cartesian_compare") return run_cartesian_compare(cfg);
  if (cfg.problem == "tokamak_convergence") return run_tokamak_convergence(cfg);
  if (cfg.problem == "tokamak_filament") return run_tokamak_filament(cfg);
  if (cfg.problem == "mapping_error") return run_mapping_error(cfg);
  throw ConfigError("unknown problem '" + cfg.problem + "'");
}

void write_run_result(const ExperimentConfig& cfg, const RunResult& result) {
  const auto dir = prepare_output(cfg);
  auto write = [&](const std::string& name, const json& j) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << j.dump(2) << '\n';
  };
  write("result.json", result.result_json());
  write("timings.json", json{{"problem", cfg.problem}, {"seconds", result.timings}});
}

}  // namespace fcifem
