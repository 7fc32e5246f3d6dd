#pragma once

#include <span>
#include <vector>

namespace fcifem {

/// LU factorisation with partial pivoting of a small dense matrix (row-major).
/// Used for spline collocation systems, whose size is one grid line.
class DenseLU {
 public:
  DenseLU(int n, std::vector<double> a);

  int size() const { return n_; }
  /// Solves A x = b in place.
  void solve(std::span<double> b) const;

 private:
  int n_;
  std::vector<double> lu_;
  std::vector<int> piv_;
};

}  // namespace fcifem
