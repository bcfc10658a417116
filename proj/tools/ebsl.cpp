// ebsl: simulate, solve, evaluate and sweep from the command line.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ebsl/cli/commands.hpp"

namespace {

using ebsl::cli::KeyValues;

// Flags override the config file; only flags the user actually gave are copied.
template <typename T>
void put(KeyValues& kv, const CLI::Option* opt, const std::string& key, const T& value) {
  if (opt->count() == 0) return;
  if constexpr (std::is_same_v<T, std::string>) {
    kv[key] = value;
  } else if constexpr (std::is_floating_point_v<T>) {
    kv[key] = ebsl::cli::format_double(value);
  } else {
    kv[key] = std::to_string(value);
  }
}

void put_pairs(KeyValues& kv, const std::vector<std::string>& pairs) {
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--set", "expected key=value, got '" + p + "'");
    kv[p.substr(0, eq)] = p.substr(eq + 1);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical Bayes sparse source localization"};
  app.require_subcommand(1);

  // simulate
  ebsl::cli::SimulateRequest sim;
  long sim_S = 0, sim_N = 0, sim_T = 0;
  double sim_snr = 0;
  long sim_seed = 0;
  std::vector<std::string> sim_set;
  auto* c_sim = app.add_subcommand("simulate", "Generate the ring phantom and noisy data");
  c_sim->add_option("--config", sim.config_path, "key = value file");
  c_sim->add_option("--out", sim.out_dir, "output directory (default $EBSL_OUT_ROOT/simulate)");
  auto* o_S = c_sim->add_option("--S", sim_S, "number of sources");
  auto* o_N = c_sim->add_option("--N", sim_N, "number of sensors");
  auto* o_T = c_sim->add_option("--T", sim_T, "number of time samples");
  auto* o_snr = c_sim->add_option("--snr", sim_snr, "peak SNR in dB");
  auto* o_seed = c_sim->add_option("--seed", sim_seed, "noise seed");
  c_sim->add_option("--set", sim_set, "extra key=value overrides");

  // solve
  ebsl::cli::SolveRequest sol;
  std::string method, k_path, v_path;
  long max_iter = 0, jobs = 0;
  double lambda = 0;
  std::vector<std::string> sol_set;
  auto* c_sol = app.add_subcommand("solve", "Estimate sources with one method");
  c_sol->add_option("--config", sol.config_path, "key = value file or a previous manifest.json");
  c_sol->add_option("--out", sol.out_dir, "output directory (default $EBSL_OUT_ROOT/solve)");
  auto* o_method = c_sol->add_option("--method", method, "enet-rvm, mxn-rvm, ridge, loreta, lasso-mm, enet-mm, fusion-mm");
  auto* o_K = c_sol->add_option("--K", k_path, "lead field matrix file");
  auto* o_V = c_sol->add_option("--V", v_path, "data matrix file");
  auto* o_iter = c_sol->add_option("--max-iter", max_iter, "outer iteration cap");
  auto* o_jobs = c_sol->add_option("--jobs", jobs, "worker threads (0 = all cores)");
  auto* o_lambda = c_sol->add_option("--lambda", lambda, "fixed penalty for ridge/loreta/*-mm (skips GCV)");
  c_sol->add_option("--set", sol_set, "extra key=value overrides");
  c_sol->add_flag("--csv", sol.csv_copies, "also write mu.csv");

  // eval
  ebsl::cli::EvalRequest ev;
  double zero_tol = 0;
  auto* c_eval = app.add_subcommand("eval", "Score estimates against the truth");
  c_eval->add_option("--mu", ev.mu_paths, "estimate matrix files")->required();
  c_eval->add_option("--method", ev.methods, "row labels, one per --mu");
  c_eval->add_option("--truth", ev.truth_path, "true source matrix")->required();
  c_eval->add_option("--support", ev.support_path, "true support mask (default: nonzero truth)");
  c_eval->add_flag("--auc", ev.auc, "report AUC (needs --support)");
  auto* o_zt = c_eval->add_option("--zero-tol-rel", zero_tol, "relative zero threshold for Sp");
  c_eval->add_option("--threshold", ev.threshold_frac, "detection threshold as a fraction of max|mu|");
  c_eval->add_option("--out", ev.out_path, "CSV file (default stdout)");

  // sweep
  ebsl::cli::SweepRequest sw;
  auto* c_sweep = app.add_subcommand("sweep", "Run arms x seeds on the phantom");
  c_sweep->add_option("--spec", sw.spec_path, "sweep spec file")->required();
  c_sweep->add_option("--out", sw.out_dir, "output directory (default $EBSL_OUT_ROOT/sweep)");
  c_sweep->add_option("--jobs", sw.jobs, "concurrent sub-runs");

  try {
    app.parse(argc, argv);
    if (*c_sim) {
      put(sim.overrides, o_S, "S", sim_S);
      put(sim.overrides, o_N, "N", sim_N);
      put(sim.overrides, o_T, "T", sim_T);
      put(sim.overrides, o_snr, "peak_snr_db", sim_snr);
      put(sim.overrides, o_seed, "seed", sim_seed);
      put_pairs(sim.overrides, sim_set);
      return ebsl::cli::cmd_simulate(sim);
    }
    if (*c_sol) {
      put(sol.overrides, o_method, "method", method);
      put(sol.overrides, o_K, "K", k_path);
      put(sol.overrides, o_V, "V", v_path);
      put(sol.overrides, o_iter, "max_iter", max_iter);
      put(sol.overrides, o_jobs, "jobs", jobs);
      put(sol.overrides, o_lambda, "lambda", lambda);
      put_pairs(sol.overrides, sol_set);
      return ebsl::cli::cmd_solve(sol);
    }
    if (*c_eval) {
      if (o_zt->count()) ev.zero_tol_rel = zero_tol;
      return ebsl::cli::cmd_eval(ev);
    }
    return ebsl::cli::cmd_sweep(sw);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ebsl::cli::kExitUsage;
  }
}
