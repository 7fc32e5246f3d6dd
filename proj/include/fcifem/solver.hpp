#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcifem/sparse.hpp"

namespace fcifem {

/// Reverse Cuthill-McKee ordering, perm[new] = old. Each connected component
/// starts from a pseudo-peripheral node. If the result would not reduce the
/// bandwidth, the natural ordering is returned instead.
std::vector<int> reorder_rcm(const SparseMatrix& a);

struct DirectSolveInfo {
  int bandwidth = 0;
  bool used_ldlt = false;
  int refinement_steps = 0;
  double relative_residual = 0.0;
};

/// Symmetric banded solve on the permuted matrix P A P^T: Cholesky, falling
/// back to LDL^T when a pivot is not positive. Iterative refinement is applied
/// until the relative residual is below 1e-10. Throws std::runtime_error for
/// singular systems (e.g. a periodic Laplacian whose null space was not removed).
std::vector<double> solve_direct_banded(const SparseMatrix& a, std::span<const double> b, std::span<const int> perm,
                                        DirectSolveInfo* info = nullptr);

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> residual_history;
};

/// Raised when CG fails to converge or breaks down; carries the residual history.
class CgError : public std::runtime_error {
 public:
  CgError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Jacobi-preconditioned conjugate gradients on a symmetric matrix. Converges
/// when ||b - A x|| <= tol ||b||. A consistent singular system (rhs orthogonal
/// to the null space) is handled as well.
CgResult solve_cg(const SparseMatrix& a, std::span<const double> b, double tol = 1e-10, int max_iter = 20000,
                  std::span<const double> x0 = {});

/// Removes from b its component along `null` (Euclidean projection), making a
/// symmetric singular system with that null vector consistent.
void project_out(std::vector<double>& b, std::span<const double> null);

/// Adds the multiple of `null` that makes weights . x = 0 (e.g. zero mean of
/// the represented function when weights are the basis integrals).
void fix_mean(std::vector<double>& x, std::span<const double> null, std::span<const double> weights);

/// One Fourier mode amplitude * sin(k_z Z + k_zeta zeta + phase).
struct FourierMode {
  double k_z = 0.0;
  double k_zeta = 0.0;
  double amplitude = 0.0;
  double phase = 0.0;
};

/// Exact solution of lap(phi) = rho for rho a finite sum of Fourier modes on
/// a doubly periodic (Z, zeta) domain, zero-mean solution.
class FourierSolution {
 public:
  explicit FourierSolution(std::vector<FourierMode> rho_modes);

  double rho(double z, double zeta) const;
  double phi(double z, double zeta) const;
  /// (d phi/dZ, d phi/dzeta).
  std::pair<double, double> grad_phi(double z, double zeta) const;
  const std::vector<FourierMode>& phi_modes() const { return phi_modes_; }

 private:
  std::vector<FourierMode> rho_modes_;
  std::vector<FourierMode> phi_modes_;
};

FourierSolution fourier_oracle_2d(std::vector<FourierMode> rho_modes);

/// Modes of rho = sin[n(Z - zeta)] (1 + sin Z) / 2.
std::vector<FourierMode> aligned_wave_modes(int n);

}  // namespace fcifem
