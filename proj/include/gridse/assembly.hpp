#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "gridse/csr.hpp"
#include "gridse/errors.hpp"
#include "gridse/graph_engine.hpp"
#include "gridse/measurement.hpp"
#include "gridse/network_model.hpp"
#include "gridse/types.hpp"

namespace gridse {

// Pre-reduction state index space: angle of bus b is b, magnitude of bus
// b is n + b. Slack handling maps this onto the solved system.
inline std::size_t angle_index(std::size_t b) { return b; }
inline std::size_t mag_index(std::size_t n, std::size_t b) { return n + b; }

// Maps pre-reduction indices to solved-system indices; -1 drops an index.
struct IndexReduction {
  std::vector<std::ptrdiff_t> map;
  std::size_t dim = 0;

  // Full system: all angles except the slack's, then all magnitudes;
  // dimension 2n - 1.
  static IndexReduction full(std::size_t n, std::size_t slack) {
    IndexReduction r;
    r.map.assign(2 * n, -1);
    for (std::size_t b = 0; b < n; ++b) {
      if (b < slack)
        r.map[b] = static_cast<std::ptrdiff_t>(b);
      else if (b > slack)
        r.map[b] = static_cast<std::ptrdiff_t>(b - 1);
      r.map[n + b] = static_cast<std::ptrdiff_t>(n - 1 + b);
    }
    r.dim = 2 * n - 1;
    return r;
  }

  // P side: non-slack angles only, dimension n - 1.
  static IndexReduction p_side(std::size_t n, std::size_t slack) {
    IndexReduction r;
    r.map.assign(2 * n, -1);
    for (std::size_t b = 0; b < n; ++b)
      if (b != slack)
        r.map[b] = static_cast<std::ptrdiff_t>(b < slack ? b : b - 1);
    r.dim = n - 1;
    return r;
  }

  // P side with the slack angle kept (structure inspection).
  static IndexReduction p_side_unreduced(std::size_t n) {
    IndexReduction r;
    r.map.assign(2 * n, -1);
    for (std::size_t b = 0; b < n; ++b)
      r.map[b] = static_cast<std::ptrdiff_t>(b);
    r.dim = n;
    return r;
  }

  // Q side: all magnitudes, dimension n.
  static IndexReduction q_side(std::size_t n) {
    IndexReduction r;
    r.map.assign(2 * n, -1);
    for (std::size_t b = 0; b < n; ++b)
      r.map[n + b] = static_cast<std::ptrdiff_t>(b);
    r.dim = n;
    return r;
  }
};

// Dense Jacobian block of z_i over the state variables of i and N1(i).
struct LocalH {
  std::vector<std::size_t> rows;     // measurement indices, z_i order
  std::vector<std::size_t> col_map;  // pre-reduction state indices
  std::vector<double> a;             // |rows| x |col_map|, row-major

  double& at(std::size_t r, std::size_t c) { return a[r * col_map.size() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return a[r * col_map.size() + c];
  }
};

struct LocalGain {
  std::vector<std::size_t> col_map;
  std::vector<double> a;  // |col_map| x |col_map|, symmetric

  double& at(std::size_t r, std::size_t c) { return a[r * col_map.size() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return a[r * col_map.size() + c];
  }
};

struct DecoupledPair {
  LocalH p;  // rows {P_i, P_ij} over angle columns of i and N1(i)
  LocalH q;  // rows {V_i, Q_i, Q_ij} over magnitude columns
};

inline LocalH local_h_full(const PowerGraph& g, const SystemState& s,
                           const MeasurementSet& set, std::size_t i) {
  std::size_t n = g.num_vertices();
  LocalH h;
  h.rows = set.node_partition[i];
  std::vector<std::size_t> support{i};
  for (auto nb : neighbors_within(g, i, 1)) support.push_back(nb);
  std::sort(support.begin(), support.end());
  h.col_map.reserve(2 * support.size());
  for (auto b : support) h.col_map.push_back(angle_index(b));
  for (auto b : support) h.col_map.push_back(mag_index(n, b));
  std::vector<std::ptrdiff_t> theta_col(n, -1), v_col(n, -1);
  for (std::size_t c = 0; c < support.size(); ++c) {
    theta_col[support[c]] = static_cast<std::ptrdiff_t>(c);
    v_col[support[c]] = static_cast<std::ptrdiff_t>(support.size() + c);
  }
  h.a.assign(h.rows.size() * h.col_map.size(), 0.0);

  for (std::size_t r = 0; r < h.rows.size(); ++r) {
    const Measurement& m = set.measurements[h.rows[r]];
    switch (m.kind) {
      case MeasurementKind::voltage:
        h.at(r, static_cast<std::size_t>(v_col[i])) = 1.0;
        break;
      case MeasurementKind::p_injection: {
        double dp_dti = 0.0, dp_dvi = 2.0 * s.v[i] * g.vertices[i].g_ii;
        for (const auto& [j, e] : g.adjacency[i]) {
          const EdgeAttr& ed = g.edges[e];
          double gij = (ed.from == i) ? ed.g_ft : ed.g_tf;
          double bij = (ed.from == i) ? ed.b_ft : ed.b_tf;
          double t = s.theta[i] - s.theta[j];
          double ct = std::cos(t), st = std::sin(t);
          dp_dti += s.v[i] * s.v[j] * (-gij * st + bij * ct);
          dp_dvi += s.v[j] * (gij * ct + bij * st);
          h.at(r, static_cast<std::size_t>(theta_col[j])) +=
              s.v[i] * s.v[j] * (gij * st - bij * ct);
          h.at(r, static_cast<std::size_t>(v_col[j])) +=
              s.v[i] * (gij * ct + bij * st);
        }
        h.at(r, static_cast<std::size_t>(theta_col[i])) = dp_dti;
        h.at(r, static_cast<std::size_t>(v_col[i])) = dp_dvi;
        break;
      }
      case MeasurementKind::q_injection: {
        double dq_dti = 0.0, dq_dvi = -2.0 * s.v[i] * g.vertices[i].b_ii;
        for (const auto& [j, e] : g.adjacency[i]) {
          const EdgeAttr& ed = g.edges[e];
          double gij = (ed.from == i) ? ed.g_ft : ed.g_tf;
          double bij = (ed.from == i) ? ed.b_ft : ed.b_tf;
          double t = s.theta[i] - s.theta[j];
          double ct = std::cos(t), st = std::sin(t);
          dq_dti += s.v[i] * s.v[j] * (gij * ct + bij * st);
          dq_dvi += s.v[j] * (gij * st - bij * ct);
          h.at(r, static_cast<std::size_t>(theta_col[j])) +=
              -s.v[i] * s.v[j] * (gij * ct + bij * st);
          h.at(r, static_cast<std::size_t>(v_col[j])) +=
              s.v[i] * (gij * st - bij * ct);
        }
        h.at(r, static_cast<std::size_t>(theta_col[i])) = dq_dti;
        h.at(r, static_cast<std::size_t>(v_col[i])) = dq_dvi;
        break;
      }
      case MeasurementKind::p_flow:
      case MeasurementKind::q_flow: {
        std::size_t j = g.index_of(m.to);
        std::size_t e = detail::resolve_edge(g, i, j, m.circuit);
        auto c = detail::flow_coeffs(g.edges[e], i);
        double t = s.theta[i] - s.theta[j];
        double ct = std::cos(t), st = std::sin(t);
        if (m.kind == MeasurementKind::p_flow) {
          h.at(r, static_cast<std::size_t>(theta_col[i])) =
              s.v[i] * s.v[j] * (-c.g_st * st + c.b_st * ct);
          h.at(r, static_cast<std::size_t>(theta_col[j])) =
              -s.v[i] * s.v[j] * (-c.g_st * st + c.b_st * ct);
          h.at(r, static_cast<std::size_t>(v_col[i])) =
              2.0 * s.v[i] * c.g_ss + s.v[j] * (c.g_st * ct + c.b_st * st);
          h.at(r, static_cast<std::size_t>(v_col[j])) =
              s.v[i] * (c.g_st * ct + c.b_st * st);
        } else {
          h.at(r, static_cast<std::size_t>(theta_col[i])) =
              s.v[i] * s.v[j] * (c.g_st * ct + c.b_st * st);
          h.at(r, static_cast<std::size_t>(theta_col[j])) =
              -s.v[i] * s.v[j] * (c.g_st * ct + c.b_st * st);
          h.at(r, static_cast<std::size_t>(v_col[i])) =
              -2.0 * s.v[i] * c.b_ss + s.v[j] * (c.g_st * st - c.b_st * ct);
          h.at(r, static_cast<std::size_t>(v_col[j])) =
              s.v[i] * (c.g_st * st - c.b_st * ct);
        }
        break;
      }
    }
  }
  return h;
}

// Constant fast-decoupled blocks: the exact Jacobian at flat start, P
// rows sliced against angle columns and Q rows against magnitudes.
inline DecoupledPair local_h_decoupled(const PowerGraph& g,
                                       const MeasurementSet& set,
                                       std::size_t i) {
  std::size_t n = g.num_vertices();
  SystemState flat{std::vector<double>(n, 1.0), std::vector<double>(n, 0.0)};
  LocalH full = local_h_full(g, flat, set, i);
  std::size_t half = full.col_map.size() / 2;

  auto slice = [&](const std::vector<std::size_t>& rows, std::size_t col_lo,
                   std::size_t col_n) {
    LocalH out;
    out.col_map.assign(full.col_map.begin() + col_lo,
                       full.col_map.begin() + col_lo + col_n);
    out.a.reserve(rows.size() * col_n);
    for (std::size_t r : rows) {
      out.rows.push_back(full.rows[r]);
      for (std::size_t c = 0; c < col_n; ++c)
        out.a.push_back(full.at(r, col_lo + c));
    }
    return out;
  };

  std::vector<std::size_t> p_rows, q_rows;
  for (std::size_t r = 0; r < full.rows.size(); ++r) {
    switch (set.measurements[full.rows[r]].kind) {
      case MeasurementKind::p_injection:
      case MeasurementKind::p_flow: p_rows.push_back(r); break;
      default: q_rows.push_back(r); break;
    }
  }
  return {slice(p_rows, 0, half), slice(q_rows, half, half)};
}

// G_i = H_i^T diag(w) H_i over the block's column map. Row contributions
// are summed in ascending row order.
inline LocalGain local_gain(const LocalH& h, const std::vector<double>& w) {
  if (w.size() != h.rows.size())
    throw DimensionMismatchError("local_gain: weight count mismatch");
  std::size_t nc = h.col_map.size();
  LocalGain g;
  g.col_map = h.col_map;
  g.a.assign(nc * nc, 0.0);
  for (std::size_t r = 0; r < h.rows.size(); ++r) {
    if (!(w[r] > 0.0))
      throw DimensionMismatchError("local_gain: weights must be positive");
    for (std::size_t c1 = 0; c1 < nc; ++c1) {
      double wa = w[r] * h.at(r, c1);
      if (wa == 0.0) continue;
      for (std::size_t c2 = 0; c2 < nc; ++c2)
        g.a[c1 * nc + c2] += wa * h.at(r, c2);
    }
  }
  return g;
}

inline std::vector<double> weights_for(const MeasurementSet& set,
                                       const LocalH& h) {
  std::vector<double> w;
  w.reserve(h.rows.size());
  for (std::size_t k : h.rows) w.push_back(1.0 / set.measurements[k].sigma2);
  return w;
}

// System gain matrix via row distribution and deterministic accumulation
// (ascending contributing vertex, then column).
inline CsrMatrix assemble_gain(const PowerGraph& g,
                               const std::vector<LocalGain>& local_gains,
                               const IndexReduction& red, int workers = 1) {
  std::vector<Accumulator> contribs;
  for (const auto& lg : local_gains) {
    std::size_t nc = lg.col_map.size();
    for (std::size_t r = 0; r < nc; ++r) {
      std::ptrdiff_t row = red.map[lg.col_map[r]];
      if (row < 0) continue;
      Accumulator acc;
      acc.row = static_cast<std::size_t>(row);
      for (std::size_t c = 0; c < nc; ++c) {
        std::ptrdiff_t col = red.map[lg.col_map[c]];
        if (col < 0) continue;
        acc.entries.emplace_back(static_cast<std::size_t>(col),
                                 lg.at(r, c));
      }
      if (!acc.entries.empty()) contribs.push_back(std::move(acc));
    }
  }
  auto rows = accumulate_rows(contribs, red.dim, workers);
  return CsrMatrix::from_rows(red.dim, rows);
}

// RHS = sum_i H_i^T R_i^{-1} r_i scattered into the solved index space.
// Per-vertex pieces run in parallel; the final reduction is a fixed
// ascending-vertex sum.
inline std::vector<double> build_rhs(const PowerGraph& g,
                                     const std::vector<LocalH>& local_hs,
                                     const MeasurementSet& set,
                                     const std::vector<double>& r,
                                     const IndexReduction& red,
                                     int workers = 1) {
  // stacked-z position of each measurement index
  std::vector<std::size_t> pos(set.size());
  {
    std::size_t p = 0;
    for (const auto& zi : set.node_partition)
      for (std::size_t k : zi) pos[k] = p++;
    if (p != set.size())
      throw DimensionMismatchError("build_rhs: set is not partitioned");
  }
  if (r.size() != set.size())
    throw DimensionMismatchError("build_rhs: residual length mismatch");

  auto pieces = vertex_map<std::vector<double>>(
      g,
      [&](std::size_t i) {
        const LocalH& h = local_hs[i];
        std::vector<double> piece(red.dim, 0.0);
        for (std::size_t row = 0; row < h.rows.size(); ++row) {
          double wr = r[pos[h.rows[row]]] /
                      set.measurements[h.rows[row]].sigma2;
          for (std::size_t c = 0; c < h.col_map.size(); ++c) {
            std::ptrdiff_t gc = red.map[h.col_map[c]];
            if (gc >= 0) piece[static_cast<std::size_t>(gc)] +=
                h.at(row, c) * wr;
          }
        }
        return piece;
      },
      workers);

  std::vector<double> rhs(red.dim, 0.0);
  for (const auto& piece : pieces)
    for (std::size_t k = 0; k < red.dim; ++k) rhs[k] += piece[k];
  return rhs;
}

}  // namespace gridse
