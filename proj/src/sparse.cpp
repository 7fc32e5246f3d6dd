#include "fcifem/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>

namespace fcifem {

SparseMatrix::SparseMatrix(int n_rows, int n_cols, std::vector<std::int64_t> row_ptr, std::vector<int> cols,
                           std::vector<double> values)
    : n_rows_(n_rows), n_cols_(n_cols), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)),
      values_(std::move(values)) {
  if (static_cast<int>(row_ptr_.size()) != n_rows_ + 1 || cols_.size() != values_.size() ||
      row_ptr_.back() != static_cast<std::int64_t>(cols_.size())) {
    throw std::invalid_argument("SparseMatrix: inconsistent CSR arrays");
  }
  for (int i = 0; i < n_rows_; ++i) {
    for (std::int64_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
      if (cols_[p] < 0 || cols_[p] >= n_cols_) throw std::invalid_argument("SparseMatrix: column out of range");
      if (p > row_ptr_[i] && cols_[p] <= cols_[p - 1]) {
        throw std::invalid_argument("SparseMatrix: columns must be sorted and unique");
      }
    }
  }
}

SparseMatrix SparseMatrix::identity(int n) {
  std::vector<std::int64_t> ptr(n + 1);
  std::iota(ptr.begin(), ptr.end(), 0);
  std::vector<int> cols(n);
  std::iota(cols.begin(), cols.end(), 0);
  return SparseMatrix(n, n, std::move(ptr), std::move(cols), std::vector<double>(n, 1.0));
}

SparseMatrix SparseMatrix::from_triplets(int n_rows, int n_cols, std::span<const int> rows, std::span<const int> cols,
                                         std::span<const double> values) {
  if (rows.size() != cols.size() || rows.size() != values.size()) {
    throw std::invalid_argument("from_triplets: length mismatch");
  }
  SparseAccumulator acc(n_rows, n_cols);
  for (std::size_t t = 0; t < rows.size(); ++t) acc.add(rows[t], cols[t], values[t]);
  return acc.to_csr();
}

double SparseMatrix::at(int i, int j) const {
  const auto begin = cols_.begin() + row_ptr_[i];
  const auto end = cols_.begin() + row_ptr_[i + 1];
  const auto it = std::lower_bound(begin, end, j);
  return (it != end && *it == j) ? values_[it - cols_.begin()] : 0.0;
}

std::vector<double> SparseMatrix::diagonal() const {
  std::vector<double> d(std::min(n_rows_, n_cols_), 0.0);
  for (int i = 0; i < static_cast<int>(d.size()); ++i) d[i] = at(i, i);
  return d;
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  if (static_cast<int>(x.size()) != n_cols_ || static_cast<int>(y.size()) != n_rows_) {
    throw std::invalid_argument("SparseMatrix::multiply: size mismatch");
  }
  for (int i = 0; i < n_rows_; ++i) {
    double s = 0.0;
    for (std::int64_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) s += values_[p] * x[cols_[p]];
    y[i] = s;
  }
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(n_rows_);
  multiply(x, y);
  return y;
}

int SparseMatrix::bandwidth() const {
  int bw = 0;
  for (int i = 0; i < n_rows_; ++i) {
    for (std::int64_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) bw = std::max(bw, std::abs(i - cols_[p]));
  }
  return bw;
}

double SparseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double SparseMatrix::asymmetry() const {
  if (n_rows_ != n_cols_) throw std::logic_error("asymmetry: matrix not square");
  double m = 0.0;
  for (int i = 0; i < n_rows_; ++i) {
    for (std::int64_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) m = std::max(m, std::abs(values_[p] - at(cols_[p], i)));
  }
  return m;
}

bool SparseMatrix::structurally_symmetric() const {
  if (n_rows_ != n_cols_) return false;
  for (int i = 0; i < n_rows_; ++i) {
    for (std::int64_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
      const int j = cols_[p];
      const auto begin = cols_.begin() + row_ptr_[j];
      const auto end = cols_.begin() + row_ptr_[j + 1];
      if (!std::binary_search(begin, end, i)) return false;
    }
  }
  return true;
}

SparseMatrix SparseMatrix::permuted(std::span<const int> perm) const {
  if (n_rows_ != n_cols_ || static_cast<int>(perm.size()) != n_rows_) {
    throw std::invalid_argument("permuted: permutation size mismatch");
  }
  std::vector<int> inv(n_rows_, -1);
  for (int k = 0; k < n_rows_; ++k) {
    if (perm[k] < 0 || perm[k] >= n_rows_ || inv[perm[k]] != -1) throw std::invalid_argument("permuted: not a permutation");
    inv[perm[k]] = k;
  }
  std::vector<int> keep(perm.begin(), perm.end());
  return submatrix(keep);
}

SparseMatrix SparseMatrix::submatrix(std::span<const int> keep) const {
  std::vector<int> new_index(n_cols_, -1);
  for (std::size_t k = 0; k < keep.size(); ++k) new_index[keep[k]] = static_cast<int>(k);
  const int m = static_cast<int>(keep.size());
  std::vector<std::int64_t> ptr(m + 1, 0);
  std::vector<int> cols;
  std::vector<double> vals;
  std::vector<std::pair<int, double>> row;
  for (int k = 0; k < m; ++k) {
    const int i = keep[k];
    row.clear();
    for (std::int64_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
      const int j = new_index[cols_[p]];
      if (j >= 0) row.emplace_back(j, values_[p]);
    }
    std::sort(row.begin(), row.end());
    for (const auto& [j, v] : row) {
      cols.push_back(j);
      vals.push_back(v);
    }
    ptr[k + 1] = static_cast<std::int64_t>(cols.size());
  }
  return SparseMatrix(m, m, std::move(ptr), std::move(cols), std::move(vals));
}

void SparseMatrix::write_matrix_market(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_matrix_market: cannot open " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << n_rows_ << ' ' << n_cols_ << ' ' << nnz() << '\n';
  out << std::setprecision(17);
  for (int i = 0; i < n_rows_; ++i) {
    for (std::int64_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
      out << i + 1 << ' ' << cols_[p] + 1 << ' ' << values_[p] << '\n';
    }
  }
  if (!out) throw std::runtime_error("write_matrix_market: write failed for " + path);
}

// ---------------------------------------------------------------- accumulator

namespace {
constexpr int kEmpty = -1;

inline std::uint32_t slot_hash(int col) { return static_cast<std::uint32_t>(col) * 2654435761u; }
}  // namespace

SparseAccumulator::SparseAccumulator(int n_rows, int n_cols) : n_rows_(n_rows), n_cols_(n_cols), rows_(n_rows) {}

void SparseAccumulator::grow(Row& r) {
  std::vector<Entry> old = std::move(r.slots);
  const std::size_t cap = old.empty() ? 32 : old.size() * 2;
  r.slots.assign(cap, Entry{kEmpty, 0.0});
  const std::uint32_t mask = static_cast<std::uint32_t>(cap - 1);
  for (const Entry& e : old) {
    if (e.col == kEmpty) continue;
    std::uint32_t h = slot_hash(e.col) & mask;
    while (r.slots[h].col != kEmpty) h = (h + 1) & mask;
    r.slots[h] = e;
  }
}

void SparseAccumulator::add(int row, int col, double value) {
  Row& r = rows_[row];
  if (2 * (r.used + 1) > static_cast<int>(r.slots.size())) grow(r);
  const std::uint32_t mask = static_cast<std::uint32_t>(r.slots.size() - 1);
  std::uint32_t h = slot_hash(col) & mask;
  while (true) {
    Entry& e = r.slots[h];
    if (e.col == col) {
      e.value += value;
      return;
    }
    if (e.col == kEmpty) {
      e.col = col;
      e.value = value;
      ++r.used;
      return;
    }
    h = (h + 1) & mask;
  }
}

void SparseAccumulator::merge(const SparseAccumulator& other) {
  if (other.n_rows_ != n_rows_ || other.n_cols_ != n_cols_) throw std::invalid_argument("merge: shape mismatch");
  for (int i = 0; i < n_rows_; ++i) {
    // Merge in column order so the result does not depend on hash layout.
    std::vector<Entry> entries;
    for (const Entry& e : other.rows_[i].slots) {
      if (e.col != kEmpty) entries.push_back(e);
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
    for (const Entry& e : entries) add(i, e.col, e.value);
  }
}

SparseMatrix SparseAccumulator::to_csr() const {
  std::vector<std::int64_t> ptr(n_rows_ + 1, 0);
  for (int i = 0; i < n_rows_; ++i) ptr[i + 1] = ptr[i] + rows_[i].used;
  std::vector<int> cols(ptr.back());
  std::vector<double> vals(ptr.back());
  std::vector<Entry> entries;
  for (int i = 0; i < n_rows_; ++i) {
    entries.clear();
    for (const Entry& e : rows_[i].slots) {
      if (e.col != kEmpty) entries.push_back(e);
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
    for (std::size_t k = 0; k < entries.size(); ++k) {
      cols[ptr[i] + k] = entries[k].col;
      vals[ptr[i] + k] = entries[k].value;
    }
  }
  return SparseMatrix(n_rows_, n_cols_, std::move(ptr), std::move(cols), std::move(vals));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace fcifem
