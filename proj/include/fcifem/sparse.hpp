#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fcifem {

/// Compressed sparse row matrix with sorted, unique column indices per row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int n_rows, int n_cols, std::vector<std::int64_t> row_ptr, std::vector<int> cols,
               std::vector<double> values);

  static SparseMatrix identity(int n);
  /// Builds from (row, col, value) triplets; duplicates are summed in input order.
  static SparseMatrix from_triplets(int n_rows, int n_cols, std::span<const int> rows, std::span<const int> cols,
                                    std::span<const double> values);

  int rows() const { return n_rows_; }
  int cols() const { return n_cols_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(cols_.size()); }
  double mean_row_nnz() const { return n_rows_ ? static_cast<double>(nnz()) / n_rows_ : 0.0; }

  const std::vector<std::int64_t>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_index() const { return cols_; }
  const std::vector<double>& values() const { return values_; }

  /// Entry (i, j) or 0 when not stored.
  double at(int i, int j) const;
  std::vector<double> diagonal() const;

  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;

  /// max_i |i - j| over stored entries.
  int bandwidth() const;
  /// Largest absolute entry.
  double max_abs() const;
  /// max |A_ij - A_ji| over stored entries (square matrices).
  double asymmetry() const;
  bool structurally_symmetric() const;

  /// P A P^T with perm[new] = old.
  SparseMatrix permuted(std::span<const int> perm) const;
  /// Rows and columns listed in `keep` (in that order).
  SparseMatrix submatrix(std::span<const int> keep) const;

  /// Matrix Market coordinate format (general, real, 1-based).
  void write_matrix_market(const std::string& path) const;

 private:
  int n_rows_ = 0;
  int n_cols_ = 0;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<int> cols_;
  std::vector<double> values_;
};

/// Row-wise open-addressing hash accumulator used during assembly. Entries are
/// summed in insertion order, so a fixed insertion sequence gives bit-identical
/// results.
class SparseAccumulator {
 public:
  SparseAccumulator(int n_rows, int n_cols);

  void add(int row, int col, double value);
  /// Adds every entry of `other` (row by row, in its slot order).
  void merge(const SparseAccumulator& other);
  SparseMatrix to_csr() const;

  int rows() const { return n_rows_; }

 private:
  struct Entry {
    int col;
    double value;
  };
  struct Row {
    std::vector<Entry> slots;
    int used = 0;
  };
  void grow(Row& r);

  int n_rows_;
  int n_cols_;
  std::vector<Row> rows_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace fcifem
