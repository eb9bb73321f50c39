#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "gridse/csr.hpp"
#include "gridse/errors.hpp"
#include "gridse/graph_engine.hpp"

namespace gridse {

// Symbolic Cholesky analysis: fill pattern of L, elimination tree, and a
// level schedule (leaves at level 0, every child strictly below its
// parent's level).
struct SymbolicFactor {
  CsrMatrix pattern;                        // L pattern incl. diagonal
  std::vector<std::ptrdiff_t> etree_parent; // -1 for roots
  std::vector<std::vector<std::size_t>> levels;
};

struct CholeskyFactor {
  CsrMatrix l;  // lower triangular, positive diagonal
};

inline SymbolicFactor symbolic_analysis(const CsrMatrix& pattern) {
  std::size_t n = pattern.dim;
  pattern.check_well_formed();
  for (std::size_t i = 0; i < n; ++i) {
    bool diag = false;
    for (std::size_t c : pattern.row_cols(i)) {
      if (c == i) diag = true;
      bool found = false;
      for (std::size_t c2 : pattern.row_cols(c))
        if (c2 == i) { found = true; break; }
      if (!found)
        throw DimensionMismatchError("symbolic_analysis: pattern asymmetric");
    }
    if (!diag)
      throw DimensionMismatchError("symbolic_analysis: missing diagonal");
  }

  SymbolicFactor sym;
  sym.etree_parent.assign(n, -1);
  std::vector<std::size_t> flag(n, SIZE_MAX);
  std::vector<std::vector<std::pair<std::size_t, double>>> lrows(n);
  // Row subtrees: L's row i holds every node on the etree paths from the
  // below-diagonal entries of A's row i up toward i.
  for (std::size_t i = 0; i < n; ++i) {
    flag[i] = i;
    for (std::size_t k : pattern.row_cols(i)) {
      if (k >= i) break;
      std::size_t t = k;
      while (flag[t] != i) {
        if (sym.etree_parent[t] < 0)
          sym.etree_parent[t] = static_cast<std::ptrdiff_t>(i);
        flag[t] = i;
        lrows[i].emplace_back(t, 0.0);
        t = static_cast<std::size_t>(sym.etree_parent[t]);
      }
    }
    std::sort(lrows[i].begin(), lrows[i].end());
    lrows[i].emplace_back(i, 0.0);
  }
  sym.pattern = CsrMatrix::from_rows(n, lrows);

  // level(j) = longest path from any leaf below j
  std::vector<std::size_t> level(n, 0);
  std::size_t max_level = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (sym.etree_parent[j] >= 0) {
      auto p = static_cast<std::size_t>(sym.etree_parent[j]);
      level[p] = std::max(level[p], level[j] + 1);
    }
    max_level = std::max(max_level, level[j]);
  }
  sym.levels.assign(max_level + 1, {});
  for (std::size_t j = 0; j < n; ++j) sym.levels[level[j]].push_back(j);
  return sym;
}

// Up-looking sparse Cholesky, rows within one level computed
// concurrently. Accumulation runs in ascending source-column order, so
// the factor is bit-identical for any worker count.
inline CholeskyFactor factorize(const CsrMatrix& g, const SymbolicFactor& sym,
                                int workers = 1) {
  std::size_t n = g.dim;
  if (sym.pattern.dim != n)
    throw DimensionMismatchError("factorize: symbolic/matrix size mismatch");
  CholeskyFactor f;
  f.l = sym.pattern;
  std::fill(f.l.values.begin(), f.l.values.end(), 0.0);
  const CsrMatrix& l = f.l;

  // w is an all-zero dense workspace; it is scattered into and cleared
  // again on every path out, including the non-positive-pivot throw.
  auto compute_row = [&](std::size_t i, std::vector<double>& w) {
    auto cols = l.row_cols(i);
    for (std::size_t k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k) {
      std::size_t c = g.col_idx[k];
      if (c > i) break;
      assert(std::binary_search(cols.begin(), cols.end(), c));
      w[c] = g.values[k];
    }
    double diag = w[i];
    double* lvals = f.l.values.data() + l.row_ptr[i];
    for (std::size_t kk = 0; kk + 1 < cols.size(); ++kk) {
      std::size_t k = cols[kk];  // ascending, diagonal last
      double s = w[k];
      for (std::size_t t = l.row_ptr[k]; t + 1 < l.row_ptr[k + 1]; ++t)
        s -= w[l.col_idx[t]] * l.values[t];
      double lik = s / l.values[l.row_ptr[k + 1] - 1];
      lvals[kk] = lik;
      w[k] = lik;
      diag -= lik * lik;
    }
    for (std::size_t c : cols) w[c] = 0.0;
    if (!(diag > 0.0)) throw NotPositiveDefiniteError(i);
    lvals[cols.size() - 1] = std::sqrt(diag);
  };

  for (const auto& lvl : sym.levels) {
    detail::parallel_for(lvl.size(), workers, [&](std::size_t idx) {
      thread_local std::vector<double> w;
      if (w.size() < n) w.assign(n, 0.0);
      compute_row(lvl[idx], w);
    });
  }
  return f;
}

// Solves L L^T x = b by forward then backward substitution.
inline std::vector<double> solve(const CholeskyFactor& f,
                                 std::vector<double> b) {
  const CsrMatrix& l = f.l;
  std::size_t n = l.dim;
  if (b.size() != n)
    throw DimensionMismatchError("solve: vector length mismatch");
  // forward: L y = b
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    std::size_t end = l.row_ptr[i + 1] - 1;
    for (std::size_t k = l.row_ptr[i]; k < end; ++k)
      s -= l.values[k] * b[l.col_idx[k]];
    b[i] = s / l.values[end];
  }
  // backward: L^T x = y
  for (std::size_t i = n; i-- > 0;) {
    std::size_t end = l.row_ptr[i + 1] - 1;
    b[i] /= l.values[end];
    for (std::size_t k = l.row_ptr[i]; k < end; ++k)
      b[l.col_idx[k]] -= l.values[k] * b[i];
  }
  return b;
}

}  // namespace gridse
