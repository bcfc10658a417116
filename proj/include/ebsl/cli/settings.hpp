#pragma once

// Run settings and their canonical "key = value" form.  Every setting that
// can change a result has a key; the manifest stores the canonical map, so a
// manifest can be fed back as a config and reproduces the run.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ebsl/baselines.hpp"
#include "ebsl/errors.hpp"
#include "ebsl/io.hpp"
#include "ebsl/simulate.hpp"
#include "ebsl/solver_types.hpp"

namespace ebsl::cli {

using KeyValues = std::map<std::string, std::string>;

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

class Reader {
 public:
  explicit Reader(const io::KeyValueConfig& cfg) : cfg_(cfg) {}

  double number(const std::string& key, double fallback) {
    if (!take(key)) return fallback;
    return parse_double(key);
  }
  std::optional<double> optional_number(const std::string& key) {
    if (!take(key)) return std::nullopt;
    return parse_double(key);
  }
  long integer(const std::string& key, long fallback) {
    if (!take(key)) return fallback;
    const std::string& v = cfg_.values.at(key);
    long out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw ConfigError(cfg_.error_at(key, "expected an integer, got '" + v + "'"));
    return out;
  }
  bool flag(const std::string& key, bool fallback) {
    if (!take(key)) return fallback;
    const std::string& v = cfg_.values.at(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(cfg_.error_at(key, "expected true/false, got '" + v + "'"));
  }
  std::string text(const std::string& key, const std::string& fallback) {
    if (!take(key)) return fallback;
    return cfg_.values.at(key);
  }
  std::optional<std::string> optional_text(const std::string& key) {
    if (!take(key)) return std::nullopt;
    return cfg_.values.at(key);
  }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(cfg_.error_at(key, what));
  }

  /// Rejects keys nobody asked for (typos must not pass silently).
  void finish() const {
    for (const auto& [k, v] : cfg_.values)
      if (!used_.count(k)) throw ConfigError(cfg_.error_at(k, "unknown key"));
  }

 private:
  bool take(const std::string& key) {
    used_.insert(key);
    return cfg_.has(key);
  }
  double parse_double(const std::string& key) const {
    const std::string& v = cfg_.values.at(key);
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    double out = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw ConfigError(cfg_.error_at(key, "expected a number, got '" + v + "'"));
    return out;
  }

  const io::KeyValueConfig& cfg_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------- simulate

struct SimulationSettings {
  long S = 200;
  long N = 31;
  long T = 64;
  double peak_snr_db = 42.0;
  std::uint64_t seed = 1;
  SourceSpec sources;
};

inline SimulationSettings read_simulation(Reader& r) {
  SimulationSettings s;
  s.S = r.integer("S", s.S);
  s.N = r.integer("N", s.N);
  s.T = r.integer("T", s.T);
  s.peak_snr_db = r.number("peak_snr_db", s.peak_snr_db);
  const long seed = r.integer("seed", 1);
  if (seed < 0) r.fail("seed", "must be >= 0");
  s.seed = static_cast<std::uint64_t>(seed);
  SourceSpec& q = s.sources;
  q.amplitude_a = r.number("amplitude_a", q.amplitude_a);
  q.amplitude_b = r.number("amplitude_b", q.amplitude_b);
  q.amplitude_c = r.number("amplitude_c", q.amplitude_c);
  q.center_a = r.integer("center_a", q.center_a);
  q.start_b = r.integer("start_b", q.start_b);
  q.center_c = r.integer("center_c", q.center_c);
  q.width_c = r.number("width_c", q.width_c);
  q.time_a = r.number("time_a", q.time_a);
  q.time_width_a = r.number("time_width_a", q.time_width_a);
  q.onset_b = r.integer("onset_b", q.onset_b);
  q.onset_c = r.integer("onset_c", q.onset_c);
  q.duration_b = r.integer("duration_b", q.duration_b);
  q.duration_c = r.integer("duration_c", q.duration_c);
  q.freq_c = r.number("freq_c", q.freq_c);
  q.phase_c = r.number("phase_c", q.phase_c);
  q.radius_generators = r.number("radius_generators", q.radius_generators);
  q.radius_electrodes = r.number("radius_electrodes", q.radius_electrodes);
  return s;
}

/// Canonical form with every default resolved against (S, T).
inline KeyValues to_key_values(const SimulationSettings& s) {
  const SourceSpec q = s.sources.resolve(s.S, s.T);
  KeyValues kv;
  kv["S"] = std::to_string(s.S);
  kv["N"] = std::to_string(s.N);
  kv["T"] = std::to_string(s.T);
  kv["peak_snr_db"] = format_double(s.peak_snr_db);
  kv["seed"] = std::to_string(s.seed);
  kv["amplitude_a"] = format_double(q.amplitude_a);
  kv["amplitude_b"] = format_double(q.amplitude_b);
  kv["amplitude_c"] = format_double(q.amplitude_c);
  kv["center_a"] = std::to_string(q.center_a);
  kv["start_b"] = std::to_string(q.start_b);
  kv["center_c"] = std::to_string(q.center_c);
  kv["width_c"] = format_double(q.width_c);
  kv["time_a"] = format_double(q.time_a);
  kv["time_width_a"] = format_double(q.time_width_a);
  kv["onset_b"] = std::to_string(q.onset_b);
  kv["onset_c"] = std::to_string(q.onset_c);
  kv["duration_b"] = std::to_string(q.duration_b);
  kv["duration_c"] = std::to_string(q.duration_c);
  kv["freq_c"] = format_double(q.freq_c);
  kv["phase_c"] = format_double(q.phase_c);
  kv["radius_generators"] = format_double(q.radius_generators);
  kv["radius_electrodes"] = format_double(q.radius_electrodes);
  return kv;
}

// ------------------------------------------------------------------- solve

enum class Method { enet_rvm, mxn_rvm, ridge, loreta, lasso_mm, enet_mm, fusion_mm };

inline const std::vector<std::pair<std::string, Method>>& method_names() {
  static const std::vector<std::pair<std::string, Method>> names = {
      {"enet-rvm", Method::enet_rvm}, {"mxn-rvm", Method::mxn_rvm},   {"ridge", Method::ridge},
      {"loreta", Method::loreta},     {"lasso-mm", Method::lasso_mm}, {"enet-mm", Method::enet_mm},
      {"fusion-mm", Method::fusion_mm}};
  return names;
}

inline std::string to_string(Method m) {
  for (const auto& [name, value] : method_names())
    if (value == m) return name;
  return "?";
}

inline std::optional<Method> parse_method(const std::string& s) {
  for (const auto& [name, value] : method_names())
    if (name == s) return value;
  return std::nullopt;
}

inline bool is_rvm(Method m) { return m == Method::enet_rvm || m == Method::mxn_rvm; }

/// Relative zero tolerance used when counting sparseness of a method's output.
inline double default_zero_tol(Method m) { return is_rvm(m) ? 1e-6 : 0.0; }

struct SolveSettings {
  Method method = Method::enet_rvm;
  std::string K_path;
  std::string V_path;
  SolverConfig solver;
  std::optional<double> lambda;  // unset: GCV over the default grid
  double mu_mix = 0.1;
  MmOptions mm;
  long grid_count = 7;
  double grid_decades = 3.0;
};

inline SolveSettings read_solve(Reader& r) {
  SolveSettings s;
  const std::string method = r.text("method", "enet-rvm");
  auto m = parse_method(method);
  if (!m) r.fail("method", "unknown method '" + method + "'");
  s.method = *m;
  s.K_path = r.text("K", "");
  s.V_path = r.text("V", "");
  SolverConfig& c = s.solver;
  c.max_iter = static_cast<int>(r.integer("max_iter", c.max_iter));
  c.tol_mu = r.number("tol_mu", c.tol_mu);
  c.tol_L = r.number("tol_L", c.tol_L);
  c.learn_k = r.flag("learn_k", c.learn_k);
  c.learn_alpha1 = r.flag("learn_alpha1", c.learn_alpha1);
  const auto a1 = r.optional_number("alpha1");
  const auto a2 = r.optional_number("alpha2");
  if (a1.has_value() != a2.has_value()) r.fail(a1 ? "alpha1" : "alpha2", "alpha1 and alpha2 must be given together");
  if (a1) c.fixed_hyper = PenaltyPair{*a1, *a2};
  c.fixed_alpha = r.optional_number("alpha");
  c.alpha_init = r.number("alpha_init", c.alpha_init);
  const std::string beta = r.text("beta_mode", to_string(c.beta_mode));
  if (beta == "fixed_one") {
    c.beta_mode = BetaMode::fixed_one;
  } else if (beta == "learned") {
    c.beta_mode = BetaMode::learned;
  } else {
    r.fail("beta_mode", "expected fixed_one or learned");
  }
  c.epsilon_prior = r.number("epsilon", c.epsilon_prior);
  c.tau = r.optional_number("tau");
  c.lambda_bar_init = r.number("lambda_bar_init", c.lambda_bar_init);
  c.ridge_init_rel = r.number("ridge_init_rel", c.ridge_init_rel);
  c.rank_tol = r.number("rank_tol", c.rank_tol);
  const long jobs = r.integer("jobs", 1);
  if (jobs < 0) r.fail("jobs", "must be >= 0");
  c.jobs = static_cast<unsigned>(jobs);
  s.lambda = r.optional_number("lambda");
  s.mu_mix = r.number("mu_mix", s.mu_mix);
  s.mm.eps_lqa = r.number("eps_lqa", s.mm.eps_lqa);
  s.mm.max_iter = static_cast<int>(r.integer("mm_max_iter", s.mm.max_iter));
  s.mm.tol = r.number("mm_tol", s.mm.tol);
  s.mm.jobs = c.jobs;
  s.grid_count = r.integer("grid_count", s.grid_count);
  s.grid_decades = r.number("grid_decades", s.grid_decades);
  if (s.grid_count < 1) r.fail("grid_count", "must be >= 1");
  if (!(s.grid_decades >= 0.0)) r.fail("grid_decades", "must be >= 0");
  if (s.mm.max_iter < 1) r.fail("mm_max_iter", "must be >= 1");
  return s;
}

inline KeyValues to_key_values(const SolveSettings& s) {
  KeyValues kv;
  const SolverConfig& c = s.solver;
  kv["method"] = to_string(s.method);
  kv["K"] = s.K_path;
  kv["V"] = s.V_path;
  kv["max_iter"] = std::to_string(c.max_iter);
  kv["tol_mu"] = format_double(c.tol_mu);
  kv["tol_L"] = format_double(c.tol_L);
  kv["learn_k"] = c.learn_k ? "true" : "false";
  kv["learn_alpha1"] = c.learn_alpha1 ? "true" : "false";
  if (c.fixed_hyper) {
    kv["alpha1"] = format_double(c.fixed_hyper->alpha1);
    kv["alpha2"] = format_double(c.fixed_hyper->alpha2);
  }
  if (c.fixed_alpha) kv["alpha"] = format_double(*c.fixed_alpha);
  kv["alpha_init"] = format_double(c.alpha_init);
  kv["beta_mode"] = to_string(c.beta_mode);
  kv["epsilon"] = format_double(c.epsilon_prior);
  if (c.tau) kv["tau"] = format_double(*c.tau);
  kv["lambda_bar_init"] = format_double(c.lambda_bar_init);
  kv["ridge_init_rel"] = format_double(c.ridge_init_rel);
  kv["rank_tol"] = format_double(c.rank_tol);
  kv["jobs"] = std::to_string(c.jobs);
  if (s.lambda) kv["lambda"] = format_double(*s.lambda);
  kv["mu_mix"] = format_double(s.mu_mix);
  kv["eps_lqa"] = format_double(s.mm.eps_lqa);
  kv["mm_max_iter"] = std::to_string(s.mm.max_iter);
  kv["mm_tol"] = format_double(s.mm.tol);
  kv["grid_count"] = std::to_string(s.grid_count);
  kv["grid_decades"] = format_double(s.grid_decades);
  return kv;
}

inline io::KeyValueConfig as_config(const KeyValues& kv, const std::string& origin) {
  io::KeyValueConfig cfg;
  cfg.values = kv;
  cfg.origin = origin;
  return cfg;
}

}  // namespace ebsl::cli
