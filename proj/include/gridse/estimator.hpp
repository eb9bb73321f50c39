#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <vector>

#include "gridse/assembly.hpp"
#include "gridse/measurement.hpp"
#include "gridse/network_model.hpp"
#include "gridse/sparse_linalg.hpp"
#include "gridse/types.hpp"

namespace gridse {

enum class EstimationMode { full_newton, fast_decoupled };

struct EstimationOptions {
  EstimationMode mode = EstimationMode::fast_decoupled;
  double tol = 1e-6;  // convergence threshold on max |dx|
  int max_iter = 50;
  int workers = 1;
};

inline SystemState flat_start(const PowerGraph& g) {
  std::size_t n = g.num_vertices();
  return {std::vector<double>(n, 1.0), std::vector<double>(n, 0.0)};
}

inline bool check_convergence(const std::vector<double>& dx, double tol) {
  double m = 0.0;
  for (double v : dx) m = std::max(m, std::abs(v));
  return m < tol;
}

namespace detail {

class StageClock {
public:
  StageClock() : start_(std::chrono::steady_clock::now()) {}

  // milliseconds since the last lap
  double lap() {
    auto now = std::chrono::steady_clock::now();
    double ms = std::chrono::duration<double, std::milli>(now - start_).count();
    start_ = now;
    return ms;
  }

private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// Gauss-Newton WLS loop. Full-Newton rebuilds and refactorizes the gain
// matrix every iteration; fast-decoupled builds and factorizes the
// constant G_P and G_Q once and alternates angle and magnitude updates.
inline EstimationResult estimate(const PowerGraph& g, MeasurementSet set,
                                 const EstimationOptions& opts) {
  if (!(opts.tol > 0.0) || opts.max_iter < 1)
    throw DimensionMismatchError("invalid estimation options");
  std::size_t n = g.num_vertices();
  if (set.node_partition.size() != n) partition_by_node(set, g);

  EstimationResult result;
  result.state = flat_start(g);
  SystemState& x = result.state;
  detail::StageClock total_clock;
  detail::StageClock clock;

  auto finish = [&](int workers) {
    auto h = evaluate_h(g, x, set, workers);
    auto r = residuals(set, h);
    result.mse = mean_squared_error(r);
    result.objective = objective(r, set);
    result.timings.total_ms = total_clock.lap();
  };

  if (opts.mode == EstimationMode::full_newton) {
    auto red = IndexReduction::full(n, g.slack_index);
    SymbolicFactor sym;
    bool have_sym = false;
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
      clock.lap();
      auto local_hs = vertex_map<LocalH>(
          g, [&](std::size_t i) { return local_h_full(g, x, set, i); },
          opts.workers);
      auto local_gs = vertex_map<LocalGain>(
          g,
          [&](std::size_t i) {
            return local_gain(local_hs[i], weights_for(set, local_hs[i]));
          },
          opts.workers);
      CsrMatrix gain = assemble_gain(g, local_gs, red, opts.workers);
      result.timings.gain_formulation_ms += clock.lap();

      if (!have_sym) {
        sym = symbolic_analysis(gain);
        have_sym = true;
      }
      CholeskyFactor fac = factorize(gain, sym, opts.workers);
      ++result.factorization_count;
      result.timings.factorization_ms += clock.lap();

      auto h = evaluate_h(g, x, set, opts.workers);
      auto r = residuals(set, h);
      result.timings.residual_substitution_total_ms += clock.lap();

      auto rhs = build_rhs(g, local_hs, set, r, red, opts.workers);
      result.timings.rhs_total_ms += clock.lap();

      auto dx = solve(fac, rhs);
      result.timings.residual_substitution_total_ms += clock.lap();

      for (std::size_t b = 0; b < n; ++b) {
        if (red.map[angle_index(b)] >= 0)
          x.theta[b] += dx[static_cast<std::size_t>(red.map[b])];
        x.v[b] += dx[static_cast<std::size_t>(red.map[mag_index(n, b)])];
      }
      result.iterations = static_cast<std::size_t>(iter);
      if (check_convergence(dx, opts.tol)) {
        result.converged = true;
        break;
      }
    }
    finish(opts.workers);
    return result;
  }

  // fast-decoupled
  auto red_p = IndexReduction::p_side(n, g.slack_index);
  auto red_q = IndexReduction::q_side(n);

  clock.lap();
  std::vector<LocalH> hp(n), hq(n);
  {
    auto pairs = vertex_map<DecoupledPair>(
        g, [&](std::size_t i) { return local_h_decoupled(g, set, i); },
        opts.workers);
    for (std::size_t i = 0; i < n; ++i) {
      hp[i] = std::move(pairs[i].p);
      hq[i] = std::move(pairs[i].q);
    }
  }
  auto gp_local = vertex_map<LocalGain>(
      g, [&](std::size_t i) { return local_gain(hp[i], weights_for(set, hp[i])); },
      opts.workers);
  auto gq_local = vertex_map<LocalGain>(
      g, [&](std::size_t i) { return local_gain(hq[i], weights_for(set, hq[i])); },
      opts.workers);
  CsrMatrix gain_p = assemble_gain(g, gp_local, red_p, opts.workers);
  CsrMatrix gain_q = assemble_gain(g, gq_local, red_q, opts.workers);
  result.timings.gain_formulation_ms += clock.lap();

  SymbolicFactor sym_p = symbolic_analysis(gain_p);
  SymbolicFactor sym_q = symbolic_analysis(gain_q);
  CholeskyFactor fac_p = factorize(gain_p, sym_p, opts.workers);
  CholeskyFactor fac_q = factorize(gain_q, sym_q, opts.workers);
  result.factorization_count += 2;
  result.timings.factorization_ms += clock.lap();

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    clock.lap();
    auto h = evaluate_h(g, x, set, opts.workers);
    auto r = residuals(set, h);
    result.timings.residual_substitution_total_ms += clock.lap();

    auto rhs_p = build_rhs(g, hp, set, r, red_p, opts.workers);
    result.timings.rhs_total_ms += clock.lap();

    auto dtheta = solve(fac_p, rhs_p);
    for (std::size_t b = 0; b < n; ++b)
      if (red_p.map[b] >= 0)
        x.theta[b] += dtheta[static_cast<std::size_t>(red_p.map[b])];
    h = evaluate_h(g, x, set, opts.workers);
    r = residuals(set, h);
    result.timings.residual_substitution_total_ms += clock.lap();

    auto rhs_q = build_rhs(g, hq, set, r, red_q, opts.workers);
    result.timings.rhs_total_ms += clock.lap();

    auto dv = solve(fac_q, rhs_q);
    for (std::size_t b = 0; b < n; ++b)
      x.v[b] += dv[static_cast<std::size_t>(red_q.map[mag_index(n, b)])];
    result.timings.residual_substitution_total_ms += clock.lap();

    result.iterations = static_cast<std::size_t>(iter);
    double mx = 0.0;
    for (double d : dtheta) mx = std::max(mx, std::abs(d));
    for (double d : dv) mx = std::max(mx, std::abs(d));
    if (mx < opts.tol) {
      result.converged = true;
      break;
    }
  }
  finish(opts.workers);
  return result;
}

}  // namespace gridse
