#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fixtures.hpp"
#include "gridse/gridse.hpp"

using namespace gridse;

namespace {

struct Fixture {
  NetworkCase nc;
  PowerGraph g;
  SystemState truth;
};

Fixture make(const char* name) {
  Fixture f;
  f.nc = fixtures::load_case(name);
  f.g = build_graph(f.nc);
  f.truth = fixtures::truth_state(f.nc);
  return f;
}

NoiseSigmas noiseless() { return {0.0, 0.0, 0.0}; }

double state_error(const SystemState& a, const SystemState& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    m = std::max(m, std::abs(a.v[i] - b.v[i]));
    m = std::max(m, std::abs(a.theta[i] - b.theta[i]));
  }
  return m;
}

}  // namespace

TEST_CASE("flat_start") {
  auto f = make("case5.case");
  auto x = flat_start(f.g);
  CHECK(x.v == std::vector<double>(5, 1.0));
  CHECK(x.theta == std::vector<double>(5, 0.0));
}

TEST_CASE("check_convergence") {
  CHECK(check_convergence({1e-7, -5e-7}, 1e-6));
  CHECK_FALSE(check_convergence({1e-7, -2e-6}, 1e-6));
  CHECK(check_convergence({}, 1e-6));
  CHECK_FALSE(check_convergence({1e-6}, 1e-6));  // strict inequality
}

TEST_CASE("estimate rejects bad options") {
  auto f = make("case2.case");
  auto set = generate_measurements(f.g, f.truth, noiseless(), 0);
  EstimationOptions bad;
  bad.tol = 0.0;
  CHECK_THROWS(estimate(f.g, set, bad));
  bad = {};
  bad.max_iter = 0;
  CHECK_THROWS(estimate(f.g, set, bad));
}

TEST_CASE("measurements taken at flat start converge in one iteration") {
  auto f = make("case2.case");
  auto set = generate_measurements(f.g, flat_start(f.g), noiseless(), 0);
  for (auto mode : {EstimationMode::full_newton, EstimationMode::fast_decoupled}) {
    EstimationOptions opts;
    opts.mode = mode;
    auto res = estimate(f.g, set, opts);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
  }
}

TEST_CASE("noiseless recovery: full Newton") {
  for (const char* name : {"case2.case", "case5.case", "ieee14.case"}) {
    auto f = make(name);
    auto set = generate_measurements(f.g, f.truth, noiseless(), 0);
    EstimationOptions opts;
    opts.mode = EstimationMode::full_newton;
    auto res = estimate(f.g, set, opts);
    INFO(name);
    REQUIRE(res.converged);
    CHECK(state_error(res.state, f.truth) < 1e-7);
    CHECK(res.mse < 1e-14);
    CHECK(res.factorization_count == res.iterations);
  }
}

TEST_CASE("noiseless recovery: fast decoupled, 14-bus") {
  auto f = make("ieee14.case");
  auto set = generate_measurements(f.g, f.truth, noiseless(), 0);
  EstimationOptions opts;  // default mode is fast_decoupled
  auto res = estimate(f.g, set, opts);
  REQUIRE(res.converged);
  CHECK(state_error(res.state, f.truth) < 1e-7);
  CHECK(res.iterations >= 3);
  CHECK(res.iterations <= 7);
  // the constant gain pair is factorized exactly once per side
  CHECK(res.factorization_count == 2);
}

TEST_CASE("noiseless recovery: fast decoupled, 118-bus") {
  auto f = make("ieee118.case");
  auto set = generate_measurements(f.g, f.truth, noiseless(), 0);
  EstimationOptions opts;
  opts.max_iter = 30;
  auto res = estimate(f.g, set, opts);
  REQUIRE(res.converged);
  CHECK(state_error(res.state, f.truth) < 1e-7);
}

TEST_CASE("mode agreement on noiseless data") {
  // With noise the two fixed points legitimately differ (the decoupled
  // RHS projects through the constant flat-start Jacobian); agreement is
  // only contractual when the residual vanishes at the solution.
  auto f = make("ieee14.case");
  auto set = generate_measurements(f.g, f.truth, noiseless(), 7);
  EstimationOptions full;
  full.mode = EstimationMode::full_newton;
  full.tol = 1e-9;
  EstimationOptions dec;
  dec.tol = 1e-9;
  dec.max_iter = 100;
  auto a = estimate(f.g, set, full);
  auto b = estimate(f.g, set, dec);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(state_error(a.state, b.state) < 1e-6);
}

TEST_CASE("slack bus stays pinned") {
  auto f = make("ieee14.case");
  auto set = generate_measurements(f.g, f.truth, {}, 11);
  for (auto mode : {EstimationMode::full_newton, EstimationMode::fast_decoupled}) {
    EstimationOptions opts;
    opts.mode = mode;
    auto res = estimate(f.g, set, opts);
    REQUIRE(res.converged);
    CHECK(res.state.theta[f.g.slack_index] == 0.0);
  }
}

TEST_CASE("worker counts give bit-identical results") {
  auto f = make("ieee118.case");
  auto set = generate_measurements(f.g, f.truth, {}, 5);
  for (auto mode : {EstimationMode::full_newton, EstimationMode::fast_decoupled}) {
    EstimationOptions opts;
    opts.mode = mode;
    opts.max_iter = 100;
    opts.workers = 1;
    auto base = estimate(f.g, set, opts);
    REQUIRE(base.converged);
    for (int w : {2, 4, 8}) {
      opts.workers = w;
      auto res = estimate(f.g, set, opts);
      REQUIRE(res.state.v == base.state.v);
      REQUIRE(res.state.theta == base.state.theta);
      REQUIRE(res.iterations == base.iterations);
      REQUIRE(res.objective == base.objective);
    }
  }
}

TEST_CASE("estimation filters noise toward the truth") {
  // Estimated state should beat the raw voltage measurements on most
  // seeds: redundancy (3n+4m readings for 2n-1 states) shrinks the error.
  auto f = make("ieee14.case");
  std::size_t wins = 0;
  const std::size_t trials = 100;
  for (std::uint64_t seed = 0; seed < trials; ++seed) {
    auto set = generate_measurements(f.g, f.truth, {}, seed);
    EstimationOptions opts;
    opts.max_iter = 100;
    auto res = estimate(f.g, set, opts);
    if (!res.converged) continue;
    double est_err = 0.0, raw_err = 0.0;
    for (std::size_t i = 0; i < f.g.num_vertices(); ++i) {
      est_err += std::pow(res.state.v[i] - f.truth.v[i], 2);
      for (const auto& k : set.node_partition[i]) {
        const auto& m = set.measurements[k];
        if (m.kind == MeasurementKind::voltage)
          raw_err += std::pow(m.value - f.truth.v[i], 2);
      }
    }
    if (est_err < raw_err) ++wins;
  }
  CHECK(wins >= 95);
}

TEST_CASE("objective decreases from flat start on noiseless data") {
  auto f = make("ieee14.case");
  auto set = generate_measurements(f.g, f.truth, noiseless(), 0);
  auto h0 = evaluate_h(f.g, flat_start(f.g), set);
  double obj0 = objective(residuals(set, h0), set);
  EstimationOptions opts;
  auto res = estimate(f.g, set, opts);
  REQUIRE(res.converged);
  CHECK(res.objective < obj0);
  // weighted objective: residuals ~1e-6 against sigmas ~1e-2 at the
  // default stopping tolerance
  CHECK(res.objective < 1e-4);
}

TEST_CASE("non-convergence is reported, not thrown") {
  auto f = make("ieee14.case");
  auto set = generate_measurements(f.g, f.truth, {}, 3);
  EstimationOptions opts;
  opts.max_iter = 1;
  opts.tol = 1e-12;
  auto res = estimate(f.g, set, opts);
  CHECK_FALSE(res.converged);
  CHECK(res.iterations == 1);
}

TEST_CASE("timings populated") {
  auto f = make("ieee14.case");
  auto set = generate_measurements(f.g, f.truth, {}, 1);
  auto res = estimate(f.g, set, {});
  REQUIRE(res.converged);
  CHECK(res.timings.total_ms > 0.0);
  CHECK(res.timings.total_ms >= res.timings.factorization_ms);
}
