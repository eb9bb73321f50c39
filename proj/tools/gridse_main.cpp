// Command-line front end: synthesize measurements, run the estimator,
// and benchmark both modes with per-stage timings.
//
// Exit codes: 0 success, 1 parse/consistency error, 2 I/O error,
// 3 non-convergence, 4 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridse/gridse.hpp"

namespace {

constexpr int kExitParse = 1;
constexpr int kExitIo = 2;
constexpr int kExitNoConverge = 3;
constexpr int kExitNumeric = 4;

struct Cli {
  std::string case_path;
  std::string measurement_path;
  std::string out_path;
  std::string mode = "decoupled";
  double tol = 1e-6;
  int max_iter = 50;
  int workers = 1;
  double sigma_v = 0.004;
  double sigma_inj = 0.01;
  double sigma_flow = 0.008;
  std::uint64_t seed = 0;
};

gridse::NetworkCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open case file: " + path);
  return gridse::parse_case(in);
}

gridse::EstimationOptions options_from(const Cli& cli) {
  gridse::EstimationOptions opts;
  opts.mode = cli.mode == "full" ? gridse::EstimationMode::full_newton
                                 : gridse::EstimationMode::fast_decoupled;
  opts.tol = cli.tol;
  opts.max_iter = cli.max_iter;
  opts.workers = cli.workers;
  return opts;
}

int cmd_gen_meas(const Cli& cli) {
  auto nc = load_case(cli.case_path);
  auto graph = gridse::build_graph(nc);
  gridse::SystemState truth;
  for (const auto& b : nc.buses) {
    truth.v.push_back(b.v_true);
    truth.theta.push_back(b.theta_true);
  }
  gridse::NoiseSigmas noise{cli.sigma_v, cli.sigma_inj, cli.sigma_flow};
  auto set = gridse::generate_measurements(graph, truth, noise, cli.seed);
  std::ofstream out(cli.out_path);
  if (!out)
    throw std::ios_base::failure("cannot open output file: " + cli.out_path);
  gridse::write_measurements(set, out);
  std::cout << "wrote " << set.size() << " measurements to " << cli.out_path
            << "\n";
  return 0;
}

int cmd_estimate(const Cli& cli) {
  auto nc = load_case(cli.case_path);
  auto graph = gridse::build_graph(nc);
  std::ifstream min(cli.measurement_path);
  if (!min)
    throw std::ios_base::failure("cannot open measurement file: " +
                                 cli.measurement_path);
  auto set = gridse::parse_measurements(min, nc);
  auto result = gridse::estimate(graph, set, options_from(cli));
  if (!cli.out_path.empty()) {
    std::ofstream out(cli.out_path);
    if (!out)
      throw std::ios_base::failure("cannot open output file: " +
                                   cli.out_path);
    gridse::write_report(result, out);
  }
  std::cout << (result.converged ? "converged" : "NOT converged") << " after "
            << result.iterations << " iterations, mse " << result.mse
            << ", objective " << result.objective << "\n";
  return result.converged ? 0 : kExitNoConverge;
}

bool states_equal(const gridse::SystemState& a, const gridse::SystemState& b) {
  return a.v == b.v && a.theta == b.theta;
}

int cmd_bench(const Cli& cli) {
  auto nc = load_case(cli.case_path);
  auto graph = gridse::build_graph(nc);
  gridse::SystemState truth;
  for (const auto& b : nc.buses) {
    truth.v.push_back(b.v_true);
    truth.theta.push_back(b.theta_true);
  }
  gridse::NoiseSigmas noise{cli.sigma_v, cli.sigma_inj, cli.sigma_flow};
  auto set = gridse::generate_measurements(graph, truth, noise, cli.seed);

  int max_workers = cli.workers > 1
                        ? cli.workers
                        : std::max(2u, std::thread::hardware_concurrency());

  nlohmann::json report = nlohmann::json::array();
  std::printf("%-10s %-8s %6s %10s  %9s %9s %9s %9s %9s\n", "mode",
              "workers", "iters", "mse", "gain", "factor", "resid+sub",
              "rhs", "total");
  for (auto mode : {gridse::EstimationMode::fast_decoupled,
                    gridse::EstimationMode::full_newton}) {
    gridse::EstimationResult base;
    for (int workers : {1, max_workers}) {
      gridse::EstimationOptions opts;
      opts.mode = mode;
      opts.tol = cli.tol;
      opts.max_iter = cli.max_iter;
      opts.workers = workers;
      auto result = gridse::estimate(graph, set, opts);
      if (!result.converged) return kExitNoConverge;
      if (workers == 1) {
        base = result;
      } else if (!states_equal(base.state, result.state) ||
                 base.iterations != result.iterations) {
        std::cerr << "determinism violation: results differ between 1 and "
                  << workers << " workers\n";
        return kExitNumeric;
      }
      const char* mode_name =
          mode == gridse::EstimationMode::full_newton ? "full" : "decoupled";
      double it = static_cast<double>(result.iterations);
      std::printf("%-10s %-8d %6zu %10.3e  %9.3f %9.3f %9.3f %9.3f %9.3f\n",
                  mode_name, workers, result.iterations, result.mse,
                  result.timings.gain_formulation_ms,
                  result.timings.factorization_ms,
                  result.timings.residual_substitution_total_ms / it,
                  result.timings.rhs_total_ms / it, result.timings.total_ms);
      auto entry = gridse::report_json(result);
      entry["mode"] = mode_name;
      entry["workers"] = workers;
      report.push_back(entry);
    }
  }

  // level-schedule statistics on the full-mode gain matrix
  {
    gridse::MeasurementSet pset = set;
    gridse::partition_by_node(pset, graph);
    auto x = gridse::flat_start(graph);
    std::vector<gridse::LocalH> hs(graph.num_vertices());
    for (std::size_t i = 0; i < graph.num_vertices(); ++i)
      hs[i] = gridse::local_h_full(graph, x, pset, i);
    std::vector<gridse::LocalGain> gs(graph.num_vertices());
    for (std::size_t i = 0; i < graph.num_vertices(); ++i)
      gs[i] = gridse::local_gain(hs[i], gridse::weights_for(pset, hs[i]));
    auto red = gridse::IndexReduction::full(graph.num_vertices(),
                                            graph.slack_index);
    auto gain = gridse::assemble_gain(graph, gs, red);
    auto sym = gridse::symbolic_analysis(gain);
    std::size_t widest = 0;
    for (const auto& lvl : sym.levels) widest = std::max(widest, lvl.size());
    std::printf("levels: %zu (widest %zu), dim %zu, nnz(G) %zu, nnz(L) %zu\n",
                sym.levels.size(), widest, gain.dim, gain.nnz(),
                sym.pattern.nnz());
    nlohmann::json stats{{"levels", sym.levels.size()},
                         {"widest_level", widest},
                         {"dim", gain.dim},
                         {"nnz_gain", gain.nnz()},
                         {"nnz_factor", sym.pattern.nnz()}};
    report.push_back({{"level_schedule", stats}});
  }

  if (!cli.out_path.empty()) {
    std::ofstream out(cli.out_path);
    if (!out)
      throw std::ios_base::failure("cannot open output file: " +
                                   cli.out_path);
    out << report.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-parallel WLS power system state estimator"};
  app.require_subcommand(1);
  Cli cli;

  auto add_common = [&](CLI::App* cmd, bool needs_meas) {
    cmd->add_option("--case", cli.case_path, "case file")->required();
    if (needs_meas)
      cmd->add_option("--measurements", cli.measurement_path,
                      "measurement file")
          ->required();
    cmd->add_option("--out", cli.out_path, "output file");
    cmd->add_option("--mode", cli.mode, "full|decoupled")
        ->check(CLI::IsMember({"full", "decoupled"}));
    cmd->add_option("--tol", cli.tol, "convergence tolerance on max|dx|");
    cmd->add_option("--max-iter", cli.max_iter, "iteration cap");
    cmd->add_option("--workers", cli.workers, "worker thread count");
    cmd->add_option("--sigma-v", cli.sigma_v, "voltage noise sigma (p.u.)");
    cmd->add_option("--sigma-inj", cli.sigma_inj,
                    "injection noise sigma (p.u.)");
    cmd->add_option("--sigma-flow", cli.sigma_flow, "flow noise sigma (p.u.)");
    cmd->add_option("--seed", cli.seed, "measurement noise seed");
  };

  auto* gen = app.add_subcommand("gen-meas",
                                 "synthesize a full measurement set");
  add_common(gen, false);
  gen->get_option("--out")->required();
  auto* est = app.add_subcommand("estimate", "run the state estimator");
  add_common(est, true);
  auto* bench = app.add_subcommand("bench",
                                   "benchmark both modes and worker counts");
  add_common(bench, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_meas(cli);
    if (est->parsed()) return cmd_estimate(cli);
    if (bench->parsed()) return cmd_bench(cli);
  } catch (const gridse::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const gridse::DimensionMismatchError& e) {
    std::cerr << "consistency error: " << e.what() << "\n";
    return kExitParse;
  } catch (const gridse::NotPositiveDefiniteError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  return 0;
}
