#include "fcifem/dense.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace fcifem {

DenseLU::DenseLU(int n, std::vector<double> a) : n_(n), lu_(std::move(a)), piv_(n) {
  if (static_cast<int>(lu_.size()) != n * n) throw std::invalid_argument("DenseLU: matrix size mismatch");
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i) {
      if (std::abs(lu_[i * n + k]) > std::abs(lu_[p * n + k])) p = i;
    }
    if (lu_[p * n + k] == 0.0) throw std::runtime_error("DenseLU: singular matrix");
    piv_[k] = p;
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(lu_[k * n + j], lu_[p * n + j]);
    }
    const double inv = 1.0 / lu_[k * n + k];
    for (int i = k + 1; i < n; ++i) {
      const double l = lu_[i * n + k] * inv;
      lu_[i * n + k] = l;
      if (l == 0.0) continue;
      for (int j = k + 1; j < n; ++j) lu_[i * n + j] -= l * lu_[k * n + j];
    }
  }
}

void DenseLU::solve(std::span<double> b) const {
  const int n = n_;
  for (int k = 0; k < n; ++k) {
    if (piv_[k] != k) std::swap(b[k], b[piv_[k]]);
  }
  for (int k = 0; k < n; ++k) {
    for (int i = k + 1; i < n; ++i) b[i] -= lu_[i * n + k] * b[k];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= lu_[i * n + j] * b[j];
    b[i] = s / lu_[i * n + i];
  }
}

}  // namespace fcifem
