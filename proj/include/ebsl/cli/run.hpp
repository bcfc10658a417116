#pragma once

// One solve or simulation, independent of any file layout.  The commands and
// the sweep driver are thin wrappers over these.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ebsl/baselines.hpp"
#include "ebsl/cli/settings.hpp"
#include "ebsl/enet_rvm.hpp"
#include "ebsl/mxn_rvm.hpp"
#include "ebsl/simulate.hpp"

namespace ebsl::cli {

using json = nlohmann::ordered_json;

struct SimulationOutput {
  RingPhantom phantom;
  NoisyData noisy;
};

inline SimulationOutput run_simulation(const SimulationSettings& s) {
  SimulationOutput out;
  out.phantom = make_phantom(s.S, s.N, s.T, s.sources);
  out.noisy = add_noise(out.phantom.V_clean, NoiseSpec{s.peak_snr_db, s.seed});
  return out;
}

struct SolveOutcome {
  Matrix mu;
  std::optional<Matrix> sigma_diag;
  std::vector<double> objective_trace;
  json hyper_trace = json::array();
  bool converged = true;
  int iterations = 1;
  std::optional<double> lambda_used;
  std::vector<std::pair<double, double>> gcv_curve;
  std::vector<std::string> warnings;
};

namespace detail {

inline json hyper_trace_json(const Solution& sol, bool mxn) {
  json trace = json::array();
  for (std::size_t m = 0; m < sol.hyper_trace.size(); ++m) {
    const HyperRecord& h = sol.hyper_trace[m];
    json row;
    row["iteration"] = m + 1;
    if (mxn) {
      row["alpha"] = h.alpha;
      row["delta_mean"] = h.delta_mean;
      row["delta_max"] = h.delta_max;
      row["beta"] = std::vector<double>(h.beta.data(), h.beta.data() + h.beta.size());
    } else {
      row["alpha1"] = std::vector<double>(h.alpha1.data(), h.alpha1.data() + h.alpha1.size());
      row["k"] = std::vector<double>(h.k.data(), h.k.data() + h.k.size());
      row["beta"] = std::vector<double>(h.beta.data(), h.beta.data() + h.beta.size());
    }
    trace.push_back(std::move(row));
  }
  return trace;
}

inline SolveOutcome from_solution(Solution&& sol, bool mxn) {
  SolveOutcome out;
  out.hyper_trace = hyper_trace_json(sol, mxn);
  out.mu = std::move(sol.mu);
  out.sigma_diag = std::move(sol.sigma_diag);
  out.objective_trace = std::move(sol.objective_trace);
  out.converged = sol.converged;
  out.iterations = sol.iterations;
  out.warnings = std::move(sol.warnings);
  return out;
}

/// Column objectives summed per iteration; finished columns keep their last value.
inline std::vector<double> summed_trace(const std::vector<std::vector<double>>& per_column) {
  std::size_t longest = 0;
  for (const auto& c : per_column) longest = std::max(longest, c.size());
  std::vector<double> total(longest, 0.0);
  for (const auto& c : per_column)
    for (std::size_t m = 0; m < longest; ++m) total[m] += c[std::min(m, c.size() - 1)];
  return total;
}

}  // namespace detail

inline PenaltySpec penalty_for(Method m, Eigen::Index S, double mu_mix) {
  PenaltySpec p;
  switch (m) {
    case Method::ridge:
      p.kind = PenaltyKind::ridge;
      break;
    case Method::loreta:
      p.kind = PenaltyKind::laplacian_ridge;
      p.L_operator = ring_laplacian(S);
      break;
    case Method::lasso_mm:
      p.kind = PenaltyKind::lasso;
      break;
    case Method::enet_mm:
      p.kind = PenaltyKind::enet;
      p.mu_mix = mu_mix;
      break;
    case Method::fusion_mm:
      p.kind = PenaltyKind::lasso_fusion;
      p.L_operator = ring_first_difference(S);
      break;
    default:
      throw ConfigError("penalty_for: not a penalized least squares method");
  }
  return p;
}

inline SolveOutcome run_solve(const ProblemData& data, const SolveSettings& s) {
  if (s.method == Method::enet_rvm) return detail::from_solution(solve_enet(data, s.solver), false);
  if (s.method == Method::mxn_rvm) return detail::from_solution(solve_mxn(data, s.solver), true);

  PenaltySpec pen = penalty_for(s.method, data.sources(), s.mu_mix);
  const bool closed_form = s.method == Method::ridge || s.method == Method::loreta;
  SolveOutcome out;
  if (s.lambda) {
    pen.lambda = *s.lambda;
    pen.validate(data.sources());
    out.lambda_used = *s.lambda;
    if (closed_form) {
      out.mu = ridge_solve(data, *s.lambda, pen.L_operator);
      return out;
    }
    MmResult mm = mm_solve(data, pen, s.mm);
    out.mu = std::move(mm.J);
    out.objective_trace = detail::summed_trace(mm.objective_trace);
    out.converged = mm.converged;
    out.iterations = *std::max_element(mm.iterations.begin(), mm.iterations.end());
    return out;
  }
  const std::vector<double> grid =
      default_lambda_grid(data, pen, static_cast<int>(s.grid_count), s.grid_decades);
  GcvResult g = gcv_select(data, pen, grid, s.mm);
  out.mu = std::move(g.J);
  out.lambda_used = g.lambda;
  out.gcv_curve = std::move(g.curve);
  if (g.mm) {
    out.objective_trace = detail::summed_trace(g.mm->objective_trace);
    out.converged = g.mm->converged;
    out.iterations = *std::max_element(g.mm->iterations.begin(), g.mm->iterations.end());
  }
  return out;
}

}  // namespace ebsl::cli
