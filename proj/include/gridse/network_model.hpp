#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <unordered_map>
#include <vector>

#include "gridse/case_io.hpp"
#include "gridse/errors.hpp"

namespace gridse {

struct VertexAttr {
  double g_ii = 0.0;  // Y-bus diagonal conductance
  double b_ii = 0.0;  // Y-bus diagonal susceptance
  double gs = 0.0;    // bus shunt
  double bs = 0.0;
};

struct EdgeAttr {
  std::size_t from = 0;  // internal vertex indices
  std::size_t to = 0;
  double g_ij = 0.0;  // series admittance
  double b_ij = 0.0;
  double b_sh = 0.0;  // per-end charging susceptance
  double tap = 1.0;
  // Y-bus entries for this branch. g_ff/b_ff and g_tt/b_tt are the
  // diagonal contributions at each end; g_ft etc. the off-diagonals.
  double g_ff = 0.0, b_ff = 0.0;
  double g_tt = 0.0, b_tt = 0.0;
  double g_ft = 0.0, b_ft = 0.0;
  double g_tf = 0.0, b_tf = 0.0;
};

// Immutable attributed graph over dense 0-based vertex indices.
// Adjacency lists are sorted ascending by (neighbor, edge).
struct PowerGraph {
  std::vector<VertexAttr> vertices;
  std::vector<EdgeAttr> edges;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adjacency;
  std::size_t slack_index = 0;
  std::vector<int> bus_ids;  // internal index -> external id
  std::unordered_map<int, std::size_t> id_to_index;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_edges() const { return edges.size(); }

  std::size_t index_of(int bus_id) const {
    auto it = id_to_index.find(bus_id);
    if (it == id_to_index.end())
      throw IndexOutOfRangeError("unknown bus id " + std::to_string(bus_id));
    return it->second;
  }

  std::size_t degree(std::size_t i) const { return adjacency[i].size(); }
};

// Standard pi-equivalent with from-side off-nominal tap ratio:
//   y = 1/(r + jx),  y_sh = j*b_charging/2
//   Y_ff = (y + y_sh)/tap^2, Y_ft = Y_tf = -y/tap, Y_tt = y + y_sh
inline EdgeAttr branch_pi_model(const RawBranch& branch) {
  double den = branch.r * branch.r + branch.x * branch.x;
  if (den <= 0.0) throw SingularBranchError(branch.from, branch.to);
  EdgeAttr e;
  e.g_ij = branch.r / den;
  e.b_ij = -branch.x / den;
  e.b_sh = branch.b_charging / 2.0;
  e.tap = branch.tap;
  double t2 = branch.tap * branch.tap;
  e.g_ff = e.g_ij / t2;
  e.b_ff = (e.b_ij + e.b_sh) / t2;
  e.g_tt = e.g_ij;
  e.b_tt = e.b_ij + e.b_sh;
  e.g_ft = -e.g_ij / branch.tap;
  e.b_ft = -e.b_ij / branch.tap;
  e.g_tf = e.g_ft;
  e.b_tf = e.b_ft;
  return e;
}

inline PowerGraph build_graph(const NetworkCase& nc) {
  PowerGraph g;
  std::size_t n = nc.buses.size();
  g.vertices.resize(n);
  g.adjacency.resize(n);
  g.bus_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const RawBus& b = nc.buses[i];
    g.bus_ids[i] = b.id;
    g.id_to_index.emplace(b.id, i);
    g.vertices[i].gs = b.gs;
    g.vertices[i].bs = b.bs;
    g.vertices[i].g_ii = b.gs;
    g.vertices[i].b_ii = b.bs;
    if (b.bus_type == BusType::slack) g.slack_index = i;
  }
  g.edges.reserve(nc.branches.size());
  for (const auto& br : nc.branches) {
    EdgeAttr e = branch_pi_model(br);
    e.from = g.index_of(br.from);
    e.to = g.index_of(br.to);
    std::size_t eidx = g.edges.size();
    g.vertices[e.from].g_ii += e.g_ff;
    g.vertices[e.from].b_ii += e.b_ff;
    g.vertices[e.to].g_ii += e.g_tt;
    g.vertices[e.to].b_ii += e.b_tt;
    g.adjacency[e.from].emplace_back(e.to, eidx);
    g.adjacency[e.to].emplace_back(e.from, eidx);
    g.edges.push_back(e);
  }
  for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
  return g;
}

// Vertices reachable from i in at most k hops, excluding i, sorted.
inline std::vector<std::size_t> neighbors_within(const PowerGraph& g,
                                                 std::size_t i, int k) {
  std::vector<std::size_t> out;
  for (const auto& [j, e] : g.adjacency[i])
    if (j != i) out.push_back(j);
  if (k >= 2) {
    for (const auto& [j, e] : g.adjacency[i])
      for (const auto& [j2, e2] : g.adjacency[j])
        if (j2 != i) out.push_back(j2);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace gridse
