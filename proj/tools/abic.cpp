// abic: causal discovery of acyclic directed mixed graphs from CSV data.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "abic/cli.hpp"

namespace {

struct SolverFlags {
  double lambda = abic::OptimizerConfig{}.lambda;
  double w_threshold = abic::OptimizerConfig{}.w_threshold;
  double tol = abic::OptimizerConfig{}.tol;
  double rho_max = abic::OptimizerConfig{}.rho_max;
  int max_dual_steps = abic::OptimizerConfig{}.max_dual_steps;
  std::string constraint = "bowfree";
};

void add_solver_flags(CLI::App* app, SolverFlags& f) {
  app->add_option("--constraint", f.constraint, "Graph class: dag, bowfree or ancestral")
      ->check(CLI::IsMember({"dag", "bowfree", "ancestral"}))
      ->capture_default_str();
  app->add_option("--lambda", f.lambda, "Sparsity weight")->capture_default_str();
  app->add_option("--w-threshold", f.w_threshold, "Edge threshold on |weight|")
      ->capture_default_str();
  app->add_option("--tol", f.tol, "Parameter-change stopping tolerance")->capture_default_str();
  app->add_option("--rho-max", f.rho_max, "Largest penalty weight")->capture_default_str();
  app->add_option("--max-dual-steps", f.max_dual_steps, "Augmented-Lagrangian iterations")
      ->capture_default_str();
}

abic::OptimizerConfig to_config(const SolverFlags& f) {
  abic::OptimizerConfig c;
  c.lambda = f.lambda;
  c.w_threshold = f.w_threshold;
  c.tol = f.tol;
  c.rho_max = f.rho_max;
  c.max_dual_steps = f.max_dual_steps;
  c.constraint = *abic::parse_constraint_kind(f.constraint);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal discovery of acyclic directed mixed graphs under generalized Gaussian errors"};
  app.set_version_flag("--version", abic::cli::kVersion);
  app.require_subcommand(1);

  // discover
  abic::cli::DiscoverOptions discover;
  SolverFlags discover_flags;
  std::optional<double> discover_beta;
  std::string discover_prior;
  auto* cmd_discover = app.add_subcommand("discover", "Estimate an ADMG from a CSV file");
  cmd_discover->add_option("csv", discover.csv, "Input CSV with a header row")->required();
  cmd_discover->add_option("--beta", discover_beta, "Shape parameter (estimated when omitted)");
  cmd_discover->add_option("--prior", discover_prior, "Prior-knowledge JSON file");
  cmd_discover->add_option("--seed", discover.seed, "Seed recorded in the manifest");
  cmd_discover->add_option("--out", discover.out_dir, "Output directory")->capture_default_str();
  add_solver_flags(cmd_discover, discover_flags);

  // simulate
  abic::cli::SimulateOptions simulate;
  auto* cmd_simulate = app.add_subcommand("simulate", "Generate a random ADMG and data");
  cmd_simulate->add_option("--d", simulate.sim.d, "Number of variables")->capture_default_str();
  cmd_simulate->add_option("--n", simulate.sim.n, "Number of rows")->capture_default_str();
  cmd_simulate->add_option("--beta", simulate.sim.beta, "Error shape parameter")
      ->capture_default_str();
  cmd_simulate->add_option("--p-directed", simulate.sim.p_directed)->capture_default_str();
  cmd_simulate->add_option("--p-bidirected", simulate.sim.p_bidirected)->capture_default_str();
  cmd_simulate->add_option("--seed", simulate.sim.seed, "Master seed")->capture_default_str();
  cmd_simulate->add_flag("--grid", simulate.grid, "Emit all 18 (n, d, beta) scenarios");
  cmd_simulate->add_option("--out", simulate.out_dir, "Output directory")->capture_default_str();

  // evaluate
  abic::cli::EvaluateOptions evaluate;
  std::string evaluate_out;
  auto* cmd_evaluate = app.add_subcommand("evaluate", "Score an estimated graph against the truth");
  cmd_evaluate->add_option("estimate", evaluate.estimate, "Estimated graph JSON")->required();
  cmd_evaluate->add_option("truth", evaluate.truth, "True graph JSON")->required();
  cmd_evaluate->add_option("--out", evaluate_out, "Scores CSV (stdout when omitted)");

  // benchmark
  abic::cli::BenchmarkOptions bench;
  SolverFlags bench_flags;
  std::string beta_mode = "true";
  auto* cmd_bench = app.add_subcommand("benchmark", "Simulate, discover and score over a grid");
  cmd_bench->add_option("--n", bench.ns, "Sample sizes")->delimiter(',')->capture_default_str();
  cmd_bench->add_option("--d", bench.ds, "Dimensions")->delimiter(',')->capture_default_str();
  cmd_bench->add_option("--beta", bench.betas, "Shape parameters")
      ->delimiter(',')
      ->capture_default_str();
  cmd_bench->add_option("--replicates", bench.replicates)->capture_default_str();
  cmd_bench->add_option("--seed", bench.seed, "Master seed")->capture_default_str();
  cmd_bench->add_option("--beta-mode", beta_mode, "Use the true beta or estimate it")
      ->check(CLI::IsMember({"true", "est"}))
      ->capture_default_str();
  cmd_bench->add_option("--p-directed", bench.p_directed)->capture_default_str();
  cmd_bench->add_option("--p-bidirected", bench.p_bidirected)->capture_default_str();
  cmd_bench->add_option("--jobs", bench.jobs, "Worker threads")->capture_default_str();
  cmd_bench->add_option("--out", bench.out_dir, "Output directory")->capture_default_str();
  add_solver_flags(cmd_bench, bench_flags);

  // estimate-beta
  abic::cli::EstimateBetaOptions estimate;
  std::string estimate_out;
  auto* cmd_estimate = app.add_subcommand("estimate-beta", "Per-column shape estimates");
  cmd_estimate->add_option("csv", estimate.csv, "Input CSV with a header row")->required();
  cmd_estimate->add_option("--out", estimate_out, "Report CSV (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : abic::cli::kInputError;
  }

  if (*cmd_discover) {
    discover.beta = discover_beta;
    if (!discover_prior.empty()) discover.prior = discover_prior;
    discover.config = to_config(discover_flags);
    return abic::cli::cmd_discover(discover, std::cerr);
  }
  if (*cmd_simulate) return abic::cli::cmd_simulate(simulate, std::cerr);
  if (*cmd_evaluate) {
    if (!evaluate_out.empty()) evaluate.out = evaluate_out;
    return abic::cli::cmd_evaluate(evaluate, std::cout, std::cerr);
  }
  if (*cmd_bench) {
    bench.beta_mode =
        beta_mode == "est" ? abic::cli::BetaMode::estimated : abic::cli::BetaMode::known;
    bench.config = to_config(bench_flags);
    return abic::cli::cmd_benchmark(bench, std::cerr);
  }
  if (*cmd_estimate) {
    if (!estimate_out.empty()) estimate.out = estimate_out;
    return abic::cli::cmd_estimate_beta(estimate, std::cout, std::cerr);
  }
  return abic::cli::kInputError;
}
