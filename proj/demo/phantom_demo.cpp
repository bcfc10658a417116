// Simulates the ring phantom, runs both empirical Bayes solvers and two
// penalized baselines, and prints the evaluation table.
//
//   ebsl_demo [seed] [snr_db]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "ebsl/ebsl.hpp"

using namespace ebsl;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  const double snr = argc > 2 ? std::atof(argv[2]) : 42.0;

  const RingPhantom ph = make_phantom(200, 31, 64);
  const ProblemData data(ph.K, add_noise(ph.V_clean, NoiseSpec{snr, seed}).V);
  std::printf("S=%ld N=%ld T=%ld, peak SNR %.0f dB, seed %llu\n", static_cast<long>(data.sources()),
              static_cast<long>(data.sensors()), static_cast<long>(data.samples()), snr,
              static_cast<unsigned long long>(seed));

  auto row = [&](const char* name, const Matrix& J, double zero_tol) {
    const EvalReport e = evaluate(name, J, ph.J_true, ph.support_true, zero_tol);
    std::printf("%-10s  1-corr %.4f  Sp %6.2f  Sens %6.2f  Spec %6.2f  AUC %6.2f\n", name, e.one_minus_corr,
                e.sparseness_pct, e.sensitivity_pct, e.specificity_pct, e.auc_pct);
  };
  row("truth", ph.J_true, 0.0);

  const SolverConfig cfg;
  const Solution enet = solve_enet(data, cfg);
  std::printf("enet-rvm: %d iterations, objective %.6g\n", enet.iterations, enet.objective_trace.back());
  row("enet-rvm", enet.mu, 1e-6);
  const Solution mxn = solve_mxn(data, cfg);
  std::printf("mxn-rvm: %d iterations, objective %.6g, alpha %.4g\n", mxn.iterations, mxn.objective_trace.back(),
              mxn.hyper_trace.back().alpha);
  row("mxn-rvm", mxn.mu, 1e-6);

  PenaltySpec ridge;
  ridge.kind = PenaltyKind::ridge;
  const GcvResult r = gcv_select(data, ridge, default_lambda_grid(data, ridge));
  std::printf("ridge: GCV lambda %.4g\n", r.lambda);
  row("ridge", r.J, 0.0);

  PenaltySpec lasso;
  lasso.kind = PenaltyKind::lasso;
  const GcvResult l = gcv_select(data, lasso, default_lambda_grid(data, lasso));
  std::printf("lasso-mm: GCV lambda %.4g\n", l.lambda);
  row("lasso-mm", l.J, 0.0);
  return 0;
}
