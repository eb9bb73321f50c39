#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "gridse/errors.hpp"
#include "gridse/graph_engine.hpp"
#include "gridse/network_model.hpp"
#include "gridse/types.hpp"

namespace gridse {

struct NoiseSigmas {
  double voltage = 0.004;  // p.u., SCADA-class defaults
  double injection = 0.01;
  double flow = 0.008;

  double for_kind(MeasurementKind k) const {
    switch (k) {
      case MeasurementKind::voltage: return voltage;
      case MeasurementKind::p_injection:
      case MeasurementKind::q_injection: return injection;
      default: return flow;
    }
  }
};

namespace detail {

// The c-th edge (1-based) between vertex i and neighbor j, following the
// sorted adjacency order of i.
inline std::size_t resolve_edge(const PowerGraph& g, std::size_t i,
                                std::size_t j, int circuit) {
  int seen = 0;
  for (const auto& [nbr, e] : g.adjacency[i]) {
    if (nbr == j && ++seen == circuit) return e;
  }
  throw IndexOutOfRangeError("no such branch circuit");
}

struct FlowCoeffs {
  double g_ss, b_ss;  // sending-end diagonal
  double g_st, b_st;  // sending-to-receiving off-diagonal
};

inline FlowCoeffs flow_coeffs(const EdgeAttr& e, std::size_t sending) {
  if (sending == e.from) return {e.g_ff, e.b_ff, e.g_ft, e.b_ft};
  return {e.g_tt, e.b_tt, e.g_tf, e.b_tf};
}

}  // namespace detail

// P_i = V_i * sum_j V_j (G_ij cos t_ij + B_ij sin t_ij), j over i and N1(i)
inline double p_injection_at(const PowerGraph& g, const SystemState& s,
                             std::size_t i) {
  double acc = g.vertices[i].g_ii * s.v[i];  // j = i term
  for (const auto& [j, e] : g.adjacency[i]) {
    const EdgeAttr& ed = g.edges[e];
    double gij = (ed.from == i) ? ed.g_ft : ed.g_tf;
    double bij = (ed.from == i) ? ed.b_ft : ed.b_tf;
    double tij = s.theta[i] - s.theta[j];
    acc += s.v[j] * (gij * std::cos(tij) + bij * std::sin(tij));
  }
  return s.v[i] * acc;
}

inline double q_injection_at(const PowerGraph& g, const SystemState& s,
                             std::size_t i) {
  double acc = -g.vertices[i].b_ii * s.v[i];
  for (const auto& [j, e] : g.adjacency[i]) {
    const EdgeAttr& ed = g.edges[e];
    double gij = (ed.from == i) ? ed.g_ft : ed.g_tf;
    double bij = (ed.from == i) ? ed.b_ft : ed.b_tf;
    double tij = s.theta[i] - s.theta[j];
    acc += s.v[j] * (gij * std::sin(tij) - bij * std::cos(tij));
  }
  return s.v[i] * acc;
}

// Flow on edge e measured at `sending`; Eq. forms
//   P = V_s^2 g_ss + V_s V_t (g_st cos t + b_st sin t)
//   Q = -V_s^2 b_ss + V_s V_t (g_st sin t - b_st cos t)
inline double p_flow_at(const PowerGraph& g, const SystemState& s,
                        std::size_t edge, std::size_t sending) {
  const EdgeAttr& ed = g.edges[edge];
  std::size_t t = (sending == ed.from) ? ed.to : ed.from;
  auto c = detail::flow_coeffs(ed, sending);
  double tij = s.theta[sending] - s.theta[t];
  return s.v[sending] * s.v[sending] * c.g_ss +
         s.v[sending] * s.v[t] * (c.g_st * std::cos(tij) +
                                  c.b_st * std::sin(tij));
}

inline double q_flow_at(const PowerGraph& g, const SystemState& s,
                        std::size_t edge, std::size_t sending) {
  const EdgeAttr& ed = g.edges[edge];
  std::size_t t = (sending == ed.from) ? ed.to : ed.from;
  auto c = detail::flow_coeffs(ed, sending);
  double tij = s.theta[sending] - s.theta[t];
  return -s.v[sending] * s.v[sending] * c.b_ss +
         s.v[sending] * s.v[t] * (c.g_st * std::sin(tij) -
                                  c.b_st * std::cos(tij));
}

inline double evaluate_one(const PowerGraph& g, const SystemState& s,
                           const Measurement& m) {
  std::size_t i = g.index_of(m.bus);
  switch (m.kind) {
    case MeasurementKind::voltage: return s.v[i];
    case MeasurementKind::p_injection: return p_injection_at(g, s, i);
    case MeasurementKind::q_injection: return q_injection_at(g, s, i);
    case MeasurementKind::p_flow:
      return p_flow_at(g, s, detail::resolve_edge(g, i, g.index_of(m.to),
                                                  m.circuit), i);
    case MeasurementKind::q_flow:
      return q_flow_at(g, s, detail::resolve_edge(g, i, g.index_of(m.to),
                                                  m.circuit), i);
  }
  throw std::logic_error("unreachable");
}

// Assigns each measurement to exactly one z_i: bus quantities to their
// bus, flows (i->j) to the sending end i. Within z_i the order is V_i,
// P_i, Q_i, then flows sorted by (neighbor, circuit, P before Q).
inline void partition_by_node(MeasurementSet& set, const PowerGraph& g) {
  std::size_t n = g.num_vertices();
  set.node_partition.assign(n, {});
  for (std::size_t k = 0; k < set.measurements.size(); ++k)
    set.node_partition[g.index_of(set.measurements[k].bus)].push_back(k);
  auto rank = [&](std::size_t k) {
    const Measurement& m = set.measurements[k];
    switch (m.kind) {
      case MeasurementKind::voltage: return std::tuple{0, std::size_t{0}, 0, 0};
      case MeasurementKind::p_injection:
        return std::tuple{1, std::size_t{0}, 0, 0};
      case MeasurementKind::q_injection:
        return std::tuple{2, std::size_t{0}, 0, 0};
      case MeasurementKind::p_flow:
        return std::tuple{3, g.index_of(m.to), m.circuit, 0};
      case MeasurementKind::q_flow:
        return std::tuple{3, g.index_of(m.to), m.circuit, 1};
    }
    return std::tuple{9, std::size_t{0}, 0, 0};
  };
  for (auto& zi : set.node_partition)
    std::stable_sort(zi.begin(), zi.end(), [&](std::size_t a, std::size_t b) {
      return rank(a) < rank(b);
    });
}

// Indices into set.measurements in stacked z order (z_1 ... z_n).
inline std::vector<std::size_t> canonical_order(const MeasurementSet& set) {
  std::vector<std::size_t> order;
  order.reserve(set.size());
  for (const auto& zi : set.node_partition)
    order.insert(order.end(), zi.begin(), zi.end());
  if (order.size() != set.size())
    throw DimensionMismatchError("measurement set is not partitioned");
  return order;
}

// h(x) in stacked z order; per-vertex entries computed independently.
inline std::vector<double> evaluate_h(const PowerGraph& g,
                                      const SystemState& s,
                                      const MeasurementSet& set,
                                      int workers = 1) {
  if (s.v.size() != g.num_vertices() || s.theta.size() != g.num_vertices())
    throw DimensionMismatchError("state dimension does not match graph");
  auto per_vertex = vertex_map<std::vector<double>>(
      g,
      [&](std::size_t i) {
        std::vector<double> out;
        out.reserve(set.node_partition[i].size());
        for (std::size_t k : set.node_partition[i])
          out.push_back(evaluate_one(g, s, set.measurements[k]));
        return out;
      },
      workers);
  std::vector<double> h;
  h.reserve(set.size());
  for (const auto& v : per_vertex) h.insert(h.end(), v.begin(), v.end());
  return h;
}

// Full synthesized set: per bus V, P, Q plus both-end P/Q flows on every
// branch (3n + 4m records), values = truth + N(0, sigma_kind^2).
inline MeasurementSet generate_measurements(const PowerGraph& g,
                                            const SystemState& truth,
                                            const NoiseSigmas& noise,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  MeasurementSet set;
  auto push = [&](MeasurementKind kind, std::size_t i, std::size_t j,
                  int circuit, double h_true) {
    double sigma = noise.for_kind(kind);
    Measurement m;
    m.kind = kind;
    m.bus = g.bus_ids[i];
    m.to = (kind == MeasurementKind::p_flow || kind == MeasurementKind::q_flow)
               ? g.bus_ids[j]
               : 0;
    m.circuit = circuit;
    m.value = h_true + (sigma > 0.0 ? sigma * unit(rng) : 0.0);
    m.sigma2 = std::max(sigma * sigma, 1e-8);
    set.measurements.push_back(m);
  };
  for (std::size_t i = 0; i < g.num_vertices(); ++i) {
    push(MeasurementKind::voltage, i, 0, 1, truth.v[i]);
    push(MeasurementKind::p_injection, i, 0, 1, p_injection_at(g, truth, i));
    push(MeasurementKind::q_injection, i, 0, 1, q_injection_at(g, truth, i));
    std::size_t prev_nbr = SIZE_MAX;
    int circuit = 0;
    for (const auto& [j, e] : g.adjacency[i]) {
      circuit = (j == prev_nbr) ? circuit + 1 : 1;
      prev_nbr = j;
      push(MeasurementKind::p_flow, i, j, circuit, p_flow_at(g, truth, e, i));
      push(MeasurementKind::q_flow, i, j, circuit, q_flow_at(g, truth, e, i));
    }
  }
  partition_by_node(set, g);
  return set;
}

// r = z - h(x) in stacked z order.
inline std::vector<double> residuals(const MeasurementSet& set,
                                     const std::vector<double>& h) {
  auto order = canonical_order(set);
  if (h.size() != order.size())
    throw DimensionMismatchError("residuals: h length mismatch");
  std::vector<double> r(order.size());
  for (std::size_t k = 0; k < order.size(); ++k)
    r[k] = set.measurements[order[k]].value - h[k];
  return r;
}

// J = r^T R^{-1} r with diagonal R.
inline double objective(const std::vector<double>& r,
                        const MeasurementSet& set) {
  auto order = canonical_order(set);
  if (r.size() != order.size())
    throw DimensionMismatchError("objective: residual length mismatch");
  double j = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k)
    j += r[k] * r[k] / set.measurements[order[k]].sigma2;
  return j;
}

inline double mean_squared_error(const std::vector<double>& r) {
  if (r.empty())
    throw DimensionMismatchError("mean_squared_error: empty residual vector");
  double s = 0.0;
  for (double v : r) s += v * v;
  return s / static_cast<double>(r.size());
}

}  // namespace gridse
