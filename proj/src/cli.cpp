#include "nullspace/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nullspace/analysis.hpp"
#include "nullspace/graph.hpp"
#include "nullspace/matrix_market.hpp"
#include "nullspace/operators.hpp"
#include "nullspace/rng.hpp"
#include "nullspace/solver.hpp"

namespace nullspace {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct SolveArgs {
  std::string input;
  SolverConfig config;
  std::string mode = "gram";
  std::string precond = "none";
  std::string basis_out;
  std::string history_out;
};

void add_solver_flags(CLI::App* cmd, SolveArgs& args) {
  cmd->add_option("input", args.input, "Matrix Market file")->required();
  cmd->add_option("--epsilon", args.config.epsilon, "perturbation parameter");
  cmd->add_option("--block", args.config.block_size, "block size d (0: dimk/16)");
  cmd->add_option("--dimk", args.config.dim_k, "max Krylov dimension before restart");
  cmd->add_option("--tol", args.config.residual_tol, "stop threshold on ||A V||");
  cmd->add_option("--seed", args.config.seed, "random seed");
  cmd->add_option("--mode", args.mode, "gram | spsd")
      ->check(CLI::IsMember({"gram", "spsd"}));
  cmd->add_option("--precond", args.precond, "none | inner | outer")
      ->check(CLI::IsMember({"none", "inner", "outer"}));
  cmd->add_option("--max-restarts", args.config.max_restarts, "restart cycle limit");
  cmd->add_flag("--deterministic,!--no-deterministic", args.config.deterministic,
                "strict sequential kernels");
}

void resolve_enums(SolveArgs& args) {
  args.config.mode = args.mode == "spsd" ? SolveMode::spsd : SolveMode::gram;
  args.config.precond = args.precond == "inner"   ? PrecondKind::inner
                        : args.precond == "outer" ? PrecondKind::outer
                                                  : PrecondKind::none;
}

void print_manifest(const std::string& command, const SolveArgs& args) {
  std::cout << "# command: " << command << '\n'
            << "# input: " << args.input << '\n'
            << "# epsilon: " << args.config.epsilon << '\n'
            << "# block: " << args.config.block_size << '\n'
            << "# dimk: " << args.config.dim_k << '\n'
            << "# tol: " << args.config.residual_tol << '\n'
            << "# seed: " << args.config.seed << '\n'
            << "# mode: " << args.mode << '\n'
            << "# precond: " << args.precond << '\n'
            << "# max_restarts: " << args.config.max_restarts << '\n'
            << "# deterministic: " << (args.config.deterministic ? 1 : 0) << '\n';
}

void write_history_csv(std::ostream& out, const std::vector<RestartRecord>& history) {
  out << "restart_index,krylov_dim,matvecs_cumulative,n_converged,"
         "lambda_smallest_unconverged,residual_av\n";
  out.precision(17);
  for (const RestartRecord& r : history)
    out << r.restart_index << ',' << r.krylov_dim << ',' << r.matvecs_cumulative << ','
        << r.n_converged << ',' << r.lambda_smallest_unconverged << ',' << r.residual_av << '\n';
}

int cmd_solve(SolveArgs& args) {
  resolve_enums(args);
  const auto t0 = Clock::now();
  const SparseMatrix a = read_matrix_market_file(args.input);
  const double read_ms = ms_since(t0);

  print_manifest("solve", args);
  std::cout << "# rows: " << a.nrows << "  cols: " << a.ncols << "  nnz: " << a.nnz() << '\n';

  const auto t1 = Clock::now();
  const NullspaceResult result = solve(a, args.config);
  const double solve_ms = ms_since(t1);

  std::cout << "# time_read_ms: " << read_ms << '\n'
            << "# time_solve_ms: " << solve_ms << '\n'
            << "# time_total_ms: " << ms_since(t0) << '\n';
  std::cout << "nullity: " << result.nullity << '\n';
  std::cout << "residual_av: " << result.residual_av << '\n';
  std::cout << "residual_vav: " << result.residual_vav << '\n';
  std::cout << "matvecs: " << result.matvecs << '\n';
  std::cout << "restarts: " << result.restarts << '\n';
  std::cout << "reorthogonalizations: " << result.reorth_events << '\n';
  std::cout << "converged: " << (result.converged ? "yes" : "no") << '\n';

  if (!args.basis_out.empty()) write_matrix_market_array_file(args.basis_out, result.basis);
  if (!args.history_out.empty()) {
    std::ofstream hist(args.history_out);
    if (!hist) throw std::runtime_error("cannot write '" + args.history_out + "'");
    write_history_csv(hist, result.history);
  }
  return result.converged ? 0 : 3;
}

int cmd_laplacian(const std::string& input, std::size_t min_degree, const std::string& out_path,
                  std::string map_path) {
  const EdgeList edges = read_edge_list_file(input);
  const LaplacianBuild built = build_laplacian(edges, min_degree);

  std::cout << "# command: laplacian\n"
            << "# input: " << input << '\n'
            << "# min_degree: " << min_degree << '\n';
  std::cout << "nodes_in: " << edges.num_nodes() << '\n'
            << "edges_in: " << edges.edges.size() << '\n'
            << "dropped_low_degree: " << built.dropped_low_degree << '\n'
            << "dropped_isolated: " << built.dropped_isolated << '\n'
            << "nodes_out: " << built.laplacian.nrows << '\n'
            << "components: " << built.components << '\n';

  write_matrix_market_file(out_path, built.laplacian);
  if (map_path.empty()) map_path = out_path + ".nodes";
  std::ofstream map(map_path);
  if (!map) throw std::runtime_error("cannot write '" + map_path + "'");
  map << "# row original_node_id\n";
  for (std::size_t i = 0; i < built.node_ids.size(); ++i)
    map << i << ' ' << built.node_ids[i] << '\n';
  return 0;
}

int cmd_analyze_repulsion(const std::string& input, double epsilon, std::size_t trials,
                          std::uint64_t seed, const std::string& out_path) {
  const SparseMatrix a = read_matrix_market_file(input);
  const RepulsionReport report = repulsion_experiment(a, epsilon, trials, seed);

  std::cout << "# command: analyze repulsion\n"
            << "# input: " << input << '\n'
            << "# epsilon: " << epsilon << "  trials: " << trials << "  seed: " << seed << '\n';
  std::cout << "nullity: " << report.nullity << '\n';
  for (const auto& [delta, q] : report.quantiles)
    std::cout << "min_gap_quantile_" << delta << ": " << q << '\n';

  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    write_repulsion_csv(out, report);
  } else {
    write_repulsion_csv(std::cout, report);
  }
  return 0;
}

int cmd_analyze_angles(const std::string& input, double epsilon, std::size_t nullity,
                       std::size_t t, std::size_t ell_max, bool spsd, std::uint64_t seed,
                       const std::string& out_path) {
  const SparseMatrix a = read_matrix_market_file(input);
  const PerturbedOperator b(spsd ? OperatorMode::spsd : OperatorMode::gram, a, epsilon, seed);
  const DenseBlock bd = b.to_dense_operator();

  if (nullity == 0) {
    // Count the perturbed-zero cluster below 3 eps.
    for (double v : sym_eigvals(bd))
      if (v < 3.0 * epsilon) ++nullity;
    if (nullity == 0)
      throw std::invalid_argument("analyze angles: no eigenvalues below 3 eps; pass --nullity");
  }
  if (t == 0) t = nullity;
  if (ell_max == 0) ell_max = std::min(bd.nrows, t + 25);

  CounterRng rng(seed, 0x0a4b1e);
  const DenseBlock omega = DenseBlock::gaussian(bd.nrows, 1, rng);
  const AngleTrace trace = krylov_angle_trace(bd, omega, nullity, t, ell_max);

  std::cout << "# command: analyze angles\n"
            << "# input: " << input << '\n'
            << "# epsilon: " << epsilon << "  nullity: " << nullity << "  t: " << t
            << "  ell_max: " << ell_max << '\n';
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    write_angle_trace_csv(out, trace);
  } else {
    write_angle_trace_csv(std::cout, trace);
  }
  return 0;
}

int cmd_analyze_bounds(SolveArgs& args, double sigma_min, const std::string& out_path) {
  resolve_enums(args);
  const SparseMatrix a = read_matrix_market_file(args.input);
  print_manifest("analyze bounds", args);

  if (sigma_min <= 0.0) {
    // Exact smallest nonzero singular value from the dense spectrum.
    const DenseBlock ad = to_dense(a);
    const std::vector<double> ev = sym_eigvals(transpose_multiply(ad, ad));
    const double lam_max = std::max(ev.back(), 1.0);
    for (double lam : ev)
      if (lam > 1e-16 * lam_max * static_cast<double>(a.ncols)) {
        sigma_min = std::sqrt(lam);
        break;
      }
    if (sigma_min <= 0.0)
      throw std::invalid_argument("analyze bounds: matrix is zero; pass --sigma-min");
    std::cout << "# sigma_min (dense): " << sigma_min << '\n';
  }

  const NullspaceResult result = solve(a, args.config);
  std::cout << "nullity: " << result.nullity << '\n';
  if (result.nullity == 0) {
    std::cout << "no null space detected; bound suite skipped\n";
    return result.converged ? 0 : 3;
  }

  const std::vector<BoundCheck> checks =
      residual_bound_suite(a, result.basis, args.config.epsilon, sigma_min, args.config.seed);
  bool all_ok = true;
  for (const BoundCheck& c : checks) {
    std::cout << (c.applicable ? (c.satisfied ? "[pass] " : "[FAIL] ") : "[ n/a] ") << c.context
              << "  quantity=" << c.quantity << "  bound=" << c.bound << '\n';
    if (c.applicable && !c.satisfied) all_ok = false;
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    write_bound_checks_csv(out, checks);
  }
  return all_ok ? 0 : 3;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"randomized small-block Lanczos null-space solver"};
  app.require_subcommand(1);

  SolveArgs solve_args;
  CLI::App* solve_cmd = app.add_subcommand("solve", "compute a null-space basis");
  add_solver_flags(solve_cmd, solve_args);
  solve_cmd->add_option("--basis-out", solve_args.basis_out, "write basis (array format)");
  solve_cmd->add_option("--history-out", solve_args.history_out, "write restart history CSV");

  std::string lap_input, lap_out = "laplacian.mtx", lap_map;
  std::size_t lap_min_degree = 0;
  CLI::App* lap_cmd = app.add_subcommand("laplacian", "build a graph Laplacian from an edge list");
  lap_cmd->add_option("input", lap_input, "edge list file")->required();
  lap_cmd->add_option("--min-degree", lap_min_degree, "drop nodes of degree < N0");
  lap_cmd->add_option("--out", lap_out, "output Matrix Market path");
  lap_cmd->add_option("--map-out", lap_map, "node remap file (default: <out>.nodes)");

  CLI::App* analyze_cmd = app.add_subcommand("analyze", "theory verification harness");
  analyze_cmd->require_subcommand(1);

  std::string rep_input, rep_out;
  double rep_epsilon = 1e-3;
  std::size_t rep_trials = 100;
  std::uint64_t rep_seed = 1;
  CLI::App* rep_cmd = analyze_cmd->add_subcommand("repulsion", "min-gap statistics of eps D");
  rep_cmd->add_option("input", rep_input, "Matrix Market file")->required();
  rep_cmd->add_option("--epsilon", rep_epsilon, "perturbation parameter");
  rep_cmd->add_option("--trials", rep_trials, "number of random diagonals");
  rep_cmd->add_option("--seed", rep_seed, "random seed");
  rep_cmd->add_option("--out", rep_out, "CSV output path (default stdout)");

  std::string ang_input, ang_out;
  double ang_epsilon = 1e-3;
  std::size_t ang_nullity = 0, ang_t = 0, ang_ell_max = 0;
  bool ang_spsd = false;
  std::uint64_t ang_seed = 1;
  CLI::App* ang_cmd = analyze_cmd->add_subcommand("angles", "Krylov principal-angle decay trace");
  ang_cmd->add_option("input", ang_input, "Matrix Market file")->required();
  ang_cmd->add_option("--epsilon", ang_epsilon, "perturbation parameter");
  ang_cmd->add_option("--nullity", ang_nullity, "cluster size (default: count below 3 eps)");
  ang_cmd->add_option("--t", ang_t, "angle index (default: nullity)");
  ang_cmd->add_option("--ell-max", ang_ell_max, "trace length (default: t + 25)");
  ang_cmd->add_flag("--spsd", ang_spsd, "use B = A + eps D instead of the Gram operator");
  ang_cmd->add_option("--seed", ang_seed, "random seed");
  ang_cmd->add_option("--out", ang_out, "CSV output path (default stdout)");

  SolveArgs bnd_args;
  double bnd_sigma_min = 0.0;
  std::string bnd_out;
  CLI::App* bnd_cmd = analyze_cmd->add_subcommand("bounds", "residual bound suite on a solve");
  add_solver_flags(bnd_cmd, bnd_args);
  bnd_cmd->add_option("--sigma-min", bnd_sigma_min,
                      "smallest nonzero singular value (default: dense computation)");
  bnd_cmd->add_option("--out", bnd_out, "CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (solve_cmd->parsed()) return cmd_solve(solve_args);
    if (lap_cmd->parsed()) return cmd_laplacian(lap_input, lap_min_degree, lap_out, lap_map);
    if (rep_cmd->parsed())
      return cmd_analyze_repulsion(rep_input, rep_epsilon, rep_trials, rep_seed, rep_out);
    if (ang_cmd->parsed())
      return cmd_analyze_angles(ang_input, ang_epsilon, ang_nullity, ang_t, ang_ell_max, ang_spsd,
                                ang_seed, ang_out);
    if (bnd_cmd->parsed()) return cmd_analyze_bounds(bnd_args, bnd_sigma_min, bnd_out);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace nullspace
