#include "fcifem/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <queue>

namespace fcifem {

// ---------------------------------------------------------------- RCM

namespace {

struct Graph {
  std::vector<std::int64_t> ptr;
  std::vector<int> adj;
  int degree(int v) const { return static_cast<int>(ptr[v + 1] - ptr[v]); }
};

Graph adjacency(const SparseMatrix& a) {
  Graph g;
  const int n = a.rows();
  g.ptr.assign(n + 1, 0);
  const auto& rp = a.row_ptr();
  const auto& ci = a.col_index();
  for (int i = 0; i < n; ++i) {
    for (std::int64_t p = rp[i]; p < rp[i + 1]; ++p) {
      if (ci[p] != i) g.adj.push_back(ci[p]);
    }
    g.ptr[i + 1] = static_cast<std::int64_t>(g.adj.size());
  }
  return g;
}

/// BFS levels from `root` restricted to unvisited nodes; returns the last level
/// and the eccentricity.
std::pair<std::vector<int>, int> bfs_last_level(const Graph& g, int root, const std::vector<char>& done,
                                                std::vector<int>& level) {
  std::vector<int> frontier{root};
  std::vector<int> touched{root};
  level[root] = 0;
  int depth = 0;
  std::vector<int> last = frontier;
  while (!frontier.empty()) {
    last = frontier;
    std::vector<int> next;
    for (int v : frontier) {
      for (std::int64_t p = g.ptr[v]; p < g.ptr[v + 1]; ++p) {
        const int w = g.adj[p];
        if (done[w] || level[w] >= 0) continue;
        level[w] = depth + 1;
        next.push_back(w);
        touched.push_back(w);
      }
    }
    if (next.empty()) break;
    frontier = std::move(next);
    ++depth;
  }
  for (int v : touched) level[v] = -1;
  return {last, depth};
}

int pseudo_peripheral(const Graph& g, int start, const std::vector<char>& done, std::vector<int>& level) {
  int root = start;
  auto [last, ecc] = bfs_last_level(g, root, done, level);
  for (int iter = 0; iter < 10; ++iter) {
    int best = last.front();
    for (int v : last) {
      if (g.degree(v) < g.degree(best)) best = v;
    }
    auto [last2, ecc2] = bfs_last_level(g, best, done, level);
    if (ecc2 <= ecc) break;
    root = best;
    last = std::move(last2);
    ecc = ecc2;
  }
  return root;
}

int permuted_bandwidth(const SparseMatrix& a, const std::vector<int>& perm) {
  std::vector<int> inv(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) inv[perm[k]] = static_cast<int>(k);
  int bw = 0;
  const auto& rp = a.row_ptr();
  const auto& ci = a.col_index();
  for (int i = 0; i < a.rows(); ++i) {
    for (std::int64_t p = rp[i]; p < rp[i + 1]; ++p) bw = std::max(bw, std::abs(inv[i] - inv[ci[p]]));
  }
  return bw;
}

}  // namespace

std::vector<int> reorder_rcm(const SparseMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("reorder_rcm: matrix must be square");
  const int n = a.rows();
  const Graph g = adjacency(a);
  std::vector<char> done(n, 0);
  std::vector<int> level(n, -1);
  std::vector<int> order;
  order.reserve(n);

  std::vector<int> by_degree(n);
  std::iota(by_degree.begin(), by_degree.end(), 0);
  std::stable_sort(by_degree.begin(), by_degree.end(), [&](int x, int y) { return g.degree(x) < g.degree(y); });

  std::vector<int> nbrs;
  for (int seed : by_degree) {
    if (done[seed]) continue;
    const int root = pseudo_peripheral(g, seed, done, level);
    std::size_t head = order.size();
    order.push_back(root);
    done[root] = 1;
    while (head < order.size()) {
      const int v = order[head++];
      nbrs.clear();
      for (std::int64_t p = g.ptr[v]; p < g.ptr[v + 1]; ++p) {
        if (!done[g.adj[p]]) nbrs.push_back(g.adj[p]);
      }
      std::sort(nbrs.begin(), nbrs.end(), [&](int x, int y) {
        return g.degree(x) != g.degree(y) ? g.degree(x) < g.degree(y) : x < y;
      });
      for (int w : nbrs) {
        if (done[w]) continue;
        done[w] = 1;
        order.push_back(w);
      }
    }
  }
  std::reverse(order.begin(), order.end());

  std::vector<int> natural(n);
  std::iota(natural.begin(), natural.end(), 0);
  if (permuted_bandwidth(a, order) > a.bandwidth()) return natural;
  return order;
}

// ---------------------------------------------------------------- banded solve

namespace {

/// Lower band of a symmetric matrix, row i holding columns i-w .. i.
class BandFactor {
 public:
  BandFactor(const SparseMatrix& a, int w) : n_(a.rows()), w_(w), l_(static_cast<std::size_t>(n_) * (w + 1), 0.0) {
    const auto& rp = a.row_ptr();
    const auto& ci = a.col_index();
    const auto& v = a.values();
    for (int i = 0; i < n_; ++i) {
      for (std::int64_t p = rp[i]; p < rp[i + 1]; ++p) {
        if (ci[p] <= i) at(i, ci[p]) = v[p];
      }
    }
    original_diag_.resize(n_);
    for (int i = 0; i < n_; ++i) original_diag_[i] = std::abs(at(i, i));
  }

  double& at(int i, int j) { return l_[static_cast<std::size_t>(i) * (w_ + 1) + (j - i + w_)]; }
  double at(int i, int j) const { return l_[static_cast<std::size_t>(i) * (w_ + 1) + (j - i + w_)]; }

  /// In-place Cholesky; false when a pivot is not safely positive.
  bool cholesky() {
    for (int i = 0; i < n_; ++i) {
      const int j0 = std::max(0, i - w_);
      for (int j = j0; j <= i; ++j) {
        double s = at(i, j);
        const int k0 = std::max(j0, j - w_);
        for (int k = k0; k < j; ++k) s -= at(i, k) * at(j, k);
        if (j < i) {
          at(i, j) = s / at(j, j);
        } else {
          if (!(s > 1e-13 * original_diag_[i])) return false;
          at(i, i) = std::sqrt(s);
        }
      }
    }
    ldlt_ = false;
    return true;
  }

  /// In-place LDL^T without pivoting; throws when a pivot vanishes.
  void ldlt() {
    d_.assign(n_, 0.0);
    for (int i = 0; i < n_; ++i) {
      const int j0 = std::max(0, i - w_);
      for (int j = j0; j <= i; ++j) {
        double s = at(i, j);
        const int k0 = std::max(j0, j - w_);
        for (int k = k0; k < j; ++k) s -= at(i, k) * d_[k] * at(j, k);
        if (j < i) {
          at(i, j) = s / d_[j];
        } else {
          if (!(std::abs(s) > 1e-13 * original_diag_[i])) {
            throw std::runtime_error(
                "solve_direct_banded: singular system (zero pivot); remove the null space before solving");
          }
          d_[i] = s;
          at(i, i) = 1.0;
        }
      }
    }
    ldlt_ = true;
  }

  void solve(std::vector<double>& x) const {
    for (int i = 0; i < n_; ++i) {
      double s = x[i];
      for (int k = std::max(0, i - w_); k < i; ++k) s -= at(i, k) * x[k];
      x[i] = ldlt_ ? s : s / at(i, i);
    }
    if (ldlt_) {
      for (int i = 0; i < n_; ++i) x[i] /= d_[i];
    }
    for (int i = n_ - 1; i >= 0; --i) {
      if (!ldlt_) x[i] /= at(i, i);
      const double xi = x[i];
      for (int k = std::max(0, i - w_); k < i; ++k) x[k] -= at(i, k) * xi;
    }
  }

  bool used_ldlt() const { return ldlt_; }

 private:
  int n_;
  int w_;
  std::vector<double> l_;
  std::vector<double> d_;
  std::vector<double> original_diag_;
  bool ldlt_ = false;
};

}  // namespace

std::vector<double> solve_direct_banded(const SparseMatrix& a, std::span<const double> b, std::span<const int> perm,
                                        DirectSolveInfo* info) {
  const int n = a.rows();
  if (a.cols() != n || static_cast<int>(b.size()) != n) throw std::invalid_argument("solve_direct_banded: size mismatch");
  std::vector<int> p(perm.begin(), perm.end());
  if (p.empty()) {
    p.resize(n);
    std::iota(p.begin(), p.end(), 0);
  }
  const SparseMatrix pa = a.permuted(p);
  const int w = pa.bandwidth();
  BandFactor f(pa, w);
  if (!f.cholesky()) {
    f = BandFactor(pa, w);
    f.ldlt();
  }

  std::vector<double> pb(n);
  for (int k = 0; k < n; ++k) pb[k] = b[p[k]];
  const double bnorm = norm2(pb);
  std::vector<double> x = pb;
  f.solve(x);
  std::vector<double> r(n);
  double rel = 0.0;
  int steps = 0;
  for (;; ++steps) {
    pa.multiply(x, r);
    for (int i = 0; i < n; ++i) r[i] = pb[i] - r[i];
    rel = bnorm > 0.0 ? norm2(r) / bnorm : norm2(r);
    if (!std::isfinite(rel)) throw std::runtime_error("solve_direct_banded: non-finite solution (singular system?)");
    if (rel < 1e-10 || steps == 5) break;
    f.solve(r);
    for (int i = 0; i < n; ++i) x[i] += r[i];
  }
  if (rel >= 1e-10) {
    throw std::runtime_error("solve_direct_banded: residual " + std::to_string(rel) +
                             " above 1e-10 (singular or ill-conditioned system)");
  }
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[p[k]] = x[k];
  if (info) *info = {w, f.used_ldlt(), steps, rel};
  return out;
}

// ---------------------------------------------------------------- CG

CgResult solve_cg(const SparseMatrix& a, std::span<const double> b, double tol, int max_iter,
                  std::span<const double> x0) {
  const int n = a.rows();
  if (a.cols() != n || static_cast<int>(b.size()) != n) throw std::invalid_argument("solve_cg: size mismatch");
  CgResult res;
  res.x.assign(n, 0.0);
  if (!x0.empty()) res.x.assign(x0.begin(), x0.end());
  std::vector<double> inv_diag = a.diagonal();
  for (double& d : inv_diag) d = d > 0.0 ? 1.0 / d : 1.0;

  std::vector<double> r(b.begin(), b.end());
  std::vector<double> ap(n);
  if (!x0.empty()) {
    a.multiply(res.x, ap);
    for (int i = 0; i < n; ++i) r[i] -= ap[i];
  }
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    std::fill(res.x.begin(), res.x.end(), 0.0);
    return res;
  }
  std::vector<double> z(n), p(n);
  for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  double rel = norm2(r) / bnorm;
  res.residual_history.push_back(rel);
  for (int it = 0; it < max_iter && rel > tol; ++it) {
    a.multiply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) {
      throw CgError("solve_cg: breakdown (p^T A p <= 0); matrix not positive definite", res.residual_history);
    }
    const double alpha = rz / pap;
    for (int i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rel = norm2(r) / bnorm;
    res.residual_history.push_back(rel);
    res.iterations = it + 1;
  }
  // Confirm with the true residual (the recurrence may drift).
  a.multiply(res.x, ap);
  for (int i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  res.relative_residual = norm2(r) / bnorm;
  if (!(res.relative_residual <= 10 * tol)) {
    throw CgError("solve_cg: no convergence after " + std::to_string(res.iterations) +
                      " iterations, relative residual " + std::to_string(res.relative_residual),
                  res.residual_history);
  }
  return res;
}

void project_out(std::vector<double>& b, std::span<const double> null) {
  const double nn = dot(null, null);
  if (nn == 0.0) return;
  const double c = dot(b, null) / nn;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] -= c * null[i];
}

void fix_mean(std::vector<double>& x, std::span<const double> null, std::span<const double> weights) {
  const double wn = dot(weights, null);
  if (wn == 0.0) throw std::invalid_argument("fix_mean: weights orthogonal to the null vector");
  const double c = dot(weights, x) / wn;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= c * null[i];
}

// ---------------------------------------------------------------- Fourier oracle

FourierSolution::FourierSolution(std::vector<FourierMode> rho_modes) : rho_modes_(std::move(rho_modes)) {
  for (const FourierMode& m : rho_modes_) {
    const double k2 = m.k_z * m.k_z + m.k_zeta * m.k_zeta;
    if (k2 == 0.0) throw std::invalid_argument("fourier_oracle_2d: zero mode has no zero-mean solution");
    phi_modes_.push_back({m.k_z, m.k_zeta, -m.amplitude / k2, m.phase});
  }
}

double FourierSolution::rho(double z, double zeta) const {
  double s = 0.0;
  for (const FourierMode& m : rho_modes_) s += m.amplitude * std::sin(m.k_z * z + m.k_zeta * zeta + m.phase);
  return s;
}

double FourierSolution::phi(double z, double zeta) const {
  double s = 0.0;
  for (const FourierMode& m : phi_modes_) s += m.amplitude * std::sin(m.k_z * z + m.k_zeta * zeta + m.phase);
  return s;
}

std::pair<double, double> FourierSolution::grad_phi(double z, double zeta) const {
  double gz = 0.0;
  double gk = 0.0;
  for (const FourierMode& m : phi_modes_) {
    const double c = m.amplitude * std::cos(m.k_z * z + m.k_zeta * zeta + m.phase);
    gz += m.k_z * c;
    gk += m.k_zeta * c;
  }
  return {gz, gk};
}

FourierSolution fourier_oracle_2d(std::vector<FourierMode> rho_modes) { return FourierSolution(std::move(rho_modes)); }

std::vector<FourierMode> aligned_wave_modes(int n) {
  // sin(a)(1 + sin Z)/2 = sin(a)/2 + [cos(a - Z) - cos(a + Z)]/4 with a = n(Z - zeta),
  // and cos(t) = sin(t + pi/2).
  const double half_pi = 0.5 * std::numbers::pi;
  const double nn = n;
  return {{nn, -nn, 0.5, 0.0}, {nn - 1, -nn, 0.25, half_pi}, {nn + 1, -nn, -0.25, half_pi}};
}

}  // namespace fcifem
