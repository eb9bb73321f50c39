#pragma once

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "gridse/errors.hpp"

namespace gridse {

// Compressed sparse row matrix. Column indices are strictly increasing
// within each row; duplicates and explicit zeros are never stored.
struct CsrMatrix {
  std::size_t dim = 0;
  std::vector<std::size_t> row_ptr;  // length dim + 1
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  CsrMatrix() : row_ptr(1, 0) {}

  explicit CsrMatrix(std::size_t n) : dim(n), row_ptr(n + 1, 0) {}

  static CsrMatrix identity(std::size_t n) {
    CsrMatrix m(n);
    m.col_idx.resize(n);
    m.values.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      m.col_idx[i] = i;
      m.row_ptr[i + 1] = i + 1;
    }
    return m;
  }

  // Builds from per-row (column, value) lists; each row must already be
  // sorted by column with no duplicates.
  static CsrMatrix from_rows(
      std::size_t n,
      const std::vector<std::vector<std::pair<std::size_t, double>>>& rows) {
    if (rows.size() != n)
      throw DimensionMismatchError("row count does not match dimension");
    CsrMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& [c, v] : rows[i]) {
        if (c >= n) throw IndexOutOfRangeError("column index out of range");
        m.col_idx.push_back(c);
        m.values.push_back(v);
      }
      m.row_ptr[i + 1] = m.col_idx.size();
    }
    m.check_well_formed();
    return m;
  }

  std::size_t nnz() const { return col_idx.size(); }

  std::span<const std::size_t> row_cols(std::size_t i) const {
    return {col_idx.data() + row_ptr[i], row_ptr[i + 1] - row_ptr[i]};
  }

  std::span<const double> row_vals(std::size_t i) const {
    return {values.data() + row_ptr[i], row_ptr[i + 1] - row_ptr[i]};
  }

  // Returns A[i,j], zero if not stored.
  double at(std::size_t i, std::size_t j) const {
    auto cols = row_cols(i);
    auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return 0.0;
    return values[row_ptr[i] + static_cast<std::size_t>(it - cols.begin())];
  }

  void check_well_formed() const {
    if (row_ptr.size() != dim + 1)
      throw DimensionMismatchError("row_ptr length mismatch");
    if (row_ptr.front() != 0 || row_ptr.back() != col_idx.size())
      throw DimensionMismatchError("row_ptr bounds mismatch");
    if (col_idx.size() != values.size())
      throw DimensionMismatchError("col_idx/values length mismatch");
    for (std::size_t i = 0; i < dim; ++i) {
      if (row_ptr[i] > row_ptr[i + 1])
        throw DimensionMismatchError("row_ptr not nondecreasing");
      for (std::size_t k = row_ptr[i]; k + 1 < row_ptr[i + 1]; ++k)
        if (col_idx[k] >= col_idx[k + 1])
          throw DimensionMismatchError("columns not strictly increasing");
      if (row_ptr[i + 1] > row_ptr[i] && col_idx[row_ptr[i + 1] - 1] >= dim)
        throw IndexOutOfRangeError("column index out of range");
    }
  }
};

inline std::vector<double> spmv(const CsrMatrix& a,
                                std::span<const double> v) {
  if (v.size() != a.dim)
    throw DimensionMismatchError("spmv: vector length does not match matrix");
  std::vector<double> out(a.dim, 0.0);
  for (std::size_t i = 0; i < a.dim; ++i) {
    double s = 0.0;
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      s += a.values[k] * v[a.col_idx[k]];
    out[i] = s;
  }
  return out;
}

// Matrix Market coordinate format, 1-based indices, general symmetry.
inline void write_matrix_market(const CsrMatrix& a, std::ostream& os) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.dim << ' ' << a.dim << ' ' << a.nnz() << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < a.dim; ++i)
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      os << i + 1 << ' ' << a.col_idx[k] + 1 << ' ' << a.values[k] << '\n';
}

}  // namespace gridse
