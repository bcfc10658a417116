#pragma once

// Batch commands.  Each returns a process exit code:
//   0 success, 2 usage or configuration error, 3 I/O error, 4 numeric failure.
// Messages go to the supplied error stream; nothing here calls exit().

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ebsl/cli/run.hpp"
#include "ebsl/cli/settings.hpp"
#include "ebsl/io.hpp"
#include "ebsl/metrics.hpp"
#include "ebsl/parallel.hpp"

namespace ebsl::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kManifestVersion = 1;

/// Runs `body`, translating library exceptions into exit codes.
inline int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const json::exception& e) {
    err << "error: malformed manifest: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
}

/// Output directory: the explicit one, else $EBSL_OUT_ROOT/<name>, else ./ebsl-runs/<name>.
inline fs::path resolve_out_dir(const std::string& explicit_dir, const std::string& name) {
  if (!explicit_dir.empty()) return explicit_dir;
  const char* root = std::getenv("EBSL_OUT_ROOT");
  return fs::path(root && *root ? root : "ebsl-runs") / name;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

inline void write_text(const fs::path& path, const std::string& text) { io::write_file(path, text); }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

inline std::string csv_row(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + csv_field(cells[i]);
  return line + "\r\n";
}

inline json kv_json(const KeyValues& kv) {
  json j = json::object();
  for (const auto& [k, v] : kv) j[k] = v;
  return j;
}

/// Loads a key = value file, or the config snapshot of a JSON manifest.
inline KeyValues load_config(const std::string& path) {
  if (path.empty()) return {};
  const fs::path p(path);
  if (!fs::exists(p)) throw ConfigError("config file not found: " + path);
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    const json m = json::parse(text);
    KeyValues kv;
    for (const auto& [k, v] : m.at("config").items()) kv[k] = v.get<std::string>();
    return kv;
  }
  return io::parse_key_values(text, path).values;
}

inline io::KeyValueConfig merge(const KeyValues& base, const KeyValues& overrides, const std::string& origin) {
  io::KeyValueConfig cfg = as_config(base, origin);
  for (const auto& [k, v] : overrides) cfg.values[k] = v;
  return cfg;
}

inline Matrix mask_matrix(const Mask& m) { return m.cast<double>().matrix(); }

inline Mask matrix_mask(const Matrix& m) { return m.array() != 0.0; }

// ---------------------------------------------------------------- simulate

struct SimulateRequest {
  std::string config_path;
  std::string out_dir;
  KeyValues overrides;
};

inline int cmd_simulate(const SimulateRequest& req, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const io::KeyValueConfig cfg = merge(load_config(req.config_path), req.overrides,
                                         req.config_path.empty() ? "<flags>" : req.config_path);
    Reader r(cfg);
    const SimulationSettings s = read_simulation(r);
    r.finish();
    const SimulationOutput sim = run_simulation(s);
    const fs::path out = resolve_out_dir(req.out_dir, "simulate");
    ensure_dir(out);
    io::write_matrix(out / "K.mxio", sim.phantom.K);
    io::write_matrix(out / "V.mxio", sim.noisy.V);
    io::write_matrix(out / "V_clean.mxio", sim.phantom.V_clean);
    io::write_matrix(out / "J_true.mxio", sim.phantom.J_true);
    io::write_matrix(out / "support_true.mxio", mask_matrix(sim.phantom.support_true));
    json m;
    m["format_version"] = kManifestVersion;
    m["command"] = "simulate";
    m["config"] = kv_json(to_key_values(s));
    m["results"]["noise_sigma"] = sim.noisy.sigma;
    m["results"]["snr_convention"] = "peak: sigma = max|V_clean| * 10^(-peak_snr_db/20)";
    m["results"]["truth_sparseness_pct"] = sparseness_pct(sim.phantom.J_true);
    m["results"]["lead_field_condition"] = condition_number(sim.phantom.K);
    m["results"]["files"] = {"K.mxio", "V.mxio", "V_clean.mxio", "J_true.mxio", "support_true.mxio"};
    write_text(out / "manifest.json", m.dump(2) + "\n");
    return kExitOk;
  });
}

// ------------------------------------------------------------------- solve

struct SolveRequest {
  std::string config_path;  // key = value file or a manifest.json
  std::string out_dir;
  KeyValues overrides;      // from command-line flags
  bool csv_copies = false;
};

inline std::string objective_csv(const std::vector<double>& trace) {
  std::string s = csv_row({"iteration", "objective"});
  for (std::size_t i = 0; i < trace.size(); ++i) s += csv_row({std::to_string(i + 1), format_double(trace[i])});
  return s;
}

inline std::string hyper_csv(const json& trace) {
  std::string s;
  if (trace.empty()) return s;
  if (trace.front().contains("alpha")) {
    s = csv_row({"iteration", "alpha", "delta_mean", "delta_max", "beta_mean"});
    for (const auto& row : trace) {
      const auto beta = row.at("beta").get<std::vector<double>>();
      double mean = 0.0;
      for (double b : beta) mean += b;
      mean /= static_cast<double>(std::max<std::size_t>(beta.size(), 1));
      s += csv_row({std::to_string(row.at("iteration").get<int>()), format_double(row.at("alpha").get<double>()),
                    format_double(row.at("delta_mean").get<double>()), format_double(row.at("delta_max").get<double>()),
                    format_double(mean)});
    }
    return s;
  }
  s = csv_row({"iteration", "column", "alpha1", "k", "beta"});
  for (const auto& row : trace) {
    const auto a1 = row.at("alpha1").get<std::vector<double>>();
    const auto k = row.at("k").get<std::vector<double>>();
    const auto beta = row.at("beta").get<std::vector<double>>();
    for (std::size_t t = 0; t < a1.size(); ++t)
      s += csv_row({std::to_string(row.at("iteration").get<int>()), std::to_string(t), format_double(a1[t]),
                    format_double(k[t]), format_double(beta[t])});
  }
  return s;
}

inline std::string gcv_csv(const std::vector<std::pair<double, double>>& curve) {
  std::string s = csv_row({"lambda", "gcv"});
  for (const auto& [l, g] : curve) s += csv_row({format_double(l), format_double(g)});
  return s;
}

inline json solve_results_json(const SolveOutcome& o) {
  json r;
  r["converged"] = o.converged;
  r["iterations"] = o.iterations;
  r["objective_trace"] = o.objective_trace;
  r["hyper_trace"] = o.hyper_trace;
  if (o.lambda_used) r["lambda"] = *o.lambda_used;
  if (!o.gcv_curve.empty()) {
    json c = json::array();
    for (const auto& [l, g] : o.gcv_curve) c.push_back({l, g});
    r["gcv_curve"] = std::move(c);
  }
  r["warnings"] = o.warnings;
  return r;
}

/// Writes the artifacts of one solve into `out`.
inline void write_solve_outputs(const fs::path& out, const KeyValues& config, const SolveOutcome& o, double seconds,
                                bool csv_copies) {
  ensure_dir(out);
  io::write_matrix(out / "mu.mxio", o.mu);
  if (o.sigma_diag) io::write_matrix(out / "sigma_diag.mxio", *o.sigma_diag);
  if (csv_copies) write_text(out / "mu.csv", io::matrix_to_csv(o.mu));
  write_text(out / "objective_trace.csv", objective_csv(o.objective_trace));
  if (!o.hyper_trace.empty()) write_text(out / "hyper_trace.csv", hyper_csv(o.hyper_trace));
  if (!o.gcv_curve.empty()) write_text(out / "gcv_curve.csv", gcv_csv(o.gcv_curve));
  json m;
  m["format_version"] = kManifestVersion;
  m["command"] = "solve";
  m["config"] = kv_json(config);
  m["results"] = solve_results_json(o);
  write_text(out / "manifest.json", m.dump(2) + "\n");
  // Wall-clock time varies run to run, so it lives outside the manifest.
  json t;
  t["solve_seconds"] = seconds;
  write_text(out / "timings.json", t.dump(2) + "\n");
}

inline int cmd_solve(const SolveRequest& req, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const io::KeyValueConfig cfg = merge(load_config(req.config_path), req.overrides,
                                         req.config_path.empty() ? "<flags>" : req.config_path);
    Reader r(cfg);
    SolveSettings s = read_solve(r);
    r.finish();
    if (s.K_path.empty() || s.V_path.empty()) throw ConfigError("solve needs both K and V (--K, --V or config keys)");
    s.K_path = fs::absolute(s.K_path).lexically_normal().string();
    s.V_path = fs::absolute(s.V_path).lexically_normal().string();
    const Matrix K = io::read_matrix(s.K_path);
    const Matrix V = io::read_matrix(s.V_path);
    const ProblemData data(K, V);
    const auto t0 = std::chrono::steady_clock::now();
    const SolveOutcome o = run_solve(data, s);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& w : o.warnings) err << "warning: " << w << '\n';
    if (!o.converged) err << "note: " << to_string(s.method) << " did not converge; results are the last iterate\n";
    write_solve_outputs(resolve_out_dir(req.out_dir, "solve"), to_key_values(s), o, secs, req.csv_copies);
    return kExitOk;
  });
}

// -------------------------------------------------------------------- eval

inline const std::vector<std::string>& metric_header() {
  static const std::vector<std::string> h = {"method", "1-corr", "Sp", "Sens", "Spec", "AUC"};
  return h;
}

inline std::vector<std::string> metric_cells(const EvalReport& r, bool with_auc = true) {
  return {r.method,
          format_double(r.one_minus_corr),
          format_double(r.sparseness_pct),
          format_double(r.sensitivity_pct),
          format_double(r.specificity_pct),
          with_auc ? format_double(r.auc_pct) : std::string()};
}

struct EvalRequest {
  std::vector<std::string> mu_paths;
  std::vector<std::string> methods;  // labels, one per mu (defaults to file stem)
  std::string truth_path;
  std::string support_path;          // empty: support = nonzero cells of the truth
  bool auc = false;                  // require an explicit support file and report AUC
  std::optional<double> zero_tol_rel;
  double threshold_frac = 0.01;
  std::string out_path;              // empty: stdout
};

inline int cmd_eval(const EvalRequest& req, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    if (req.mu_paths.empty()) throw ConfigError("eval needs at least one --mu");
    if (req.truth_path.empty()) throw ConfigError("eval needs --truth");
    if (!req.methods.empty() && req.methods.size() != req.mu_paths.size())
      throw ConfigError("eval: give one --method label per --mu");
    if (req.auc && (req.support_path.empty() || !fs::exists(req.support_path)))
      throw ConfigError("eval --auc needs an existing --support file");
    const Matrix truth = io::read_matrix(req.truth_path);
    Mask support = truth.array() != 0.0;
    if (!req.support_path.empty()) {
      const Matrix sm = io::read_matrix(req.support_path);
      if (sm.rows() != truth.rows() || sm.cols() != truth.cols())
        throw DomainError("eval: support shape does not match the truth");
      support = matrix_mask(sm);
    }
    std::string table = csv_row(metric_header());
    for (std::size_t i = 0; i < req.mu_paths.size(); ++i) {
      const Matrix est = io::read_matrix(req.mu_paths[i]);
      if (est.rows() != truth.rows() || est.cols() != truth.cols())
        throw DomainError("eval: " + req.mu_paths[i] + " does not match the truth's shape");
      const std::string label = req.methods.empty() ? fs::path(req.mu_paths[i]).stem().string() : req.methods[i];
      double tol = 1e-6;
      if (req.zero_tol_rel) {
        tol = *req.zero_tol_rel;
      } else if (auto m = parse_method(label)) {
        tol = default_zero_tol(*m);
      }
      EvalReport rep;
      rep.method = label;
      rep.zero_tol_rel = tol;
      rep.one_minus_corr = one_minus_corr(est, truth);
      rep.sparseness_pct = sparseness_pct(est, tol);
      const SensSpec ss = sens_spec(est, support, req.threshold_frac);
      rep.sensitivity_pct = ss.sensitivity_pct;
      rep.specificity_pct = ss.specificity_pct;
      if (req.auc) rep.auc_pct = roc_auc(est, support);
      table += csv_row(metric_cells(rep, req.auc));
    }
    if (req.out_path.empty()) {
      out << table;
    } else {
      write_text(req.out_path, table);
    }
    return kExitOk;
  });
}

// ------------------------------------------------------------------- sweep

struct SweepArm {
  std::string name;
  KeyValues settings;
};

struct SweepSpec {
  SimulationSettings simulation;
  KeyValues simulation_kv;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepArm> arms;
};

/// Sweep files hold simulation keys, "seeds = 1,2,..." and one line per arm:
///   arm <label> = method=enet-rvm alpha1=1 alpha2=100
inline SweepSpec parse_sweep(const io::KeyValueConfig& cfg) {
  SweepSpec spec;
  io::KeyValueConfig sim_cfg;
  sim_cfg.origin = cfg.origin;
  for (const auto& [key, value] : cfg.values) {
    if (key.rfind("arm ", 0) == 0) {
      SweepArm arm;
      arm.name = io::detail::trim(key.substr(4));
      if (arm.name.empty() || arm.name.find_first_of("/\\") != std::string::npos)
        throw ConfigError(cfg.error_at(key, "arm label must be a non-empty plain name"));
      std::istringstream ws(value);
      std::string tok;
      while (ws >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError(cfg.error_at(key, "expected key=value, got '" + tok + "'"));
        arm.settings[tok.substr(0, eq)] = tok.substr(eq + 1);
      }
      if (!arm.settings.count("method")) throw ConfigError(cfg.error_at(key, "arm needs method=..."));
      spec.arms.push_back(std::move(arm));
    } else if (key == "seeds") {
      std::istringstream ss(value);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        tok = io::detail::trim(tok);
        try {
          std::size_t used = 0;
          const long long v = std::stoll(tok, &used);
          if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
          spec.seeds.push_back(static_cast<std::uint64_t>(v));
        } catch (const std::exception&) {
          throw ConfigError(cfg.error_at(key, "bad seed '" + tok + "'"));
        }
      }
    } else {
      sim_cfg.values[key] = value;
      sim_cfg.lines[key] = cfg.lines.count(key) ? cfg.lines.at(key) : 0;
    }
  }
  if (spec.arms.empty()) throw ConfigError(cfg.origin + ": sweep lists no arms");
  if (spec.seeds.empty()) spec.seeds.push_back(1);
  Reader r(sim_cfg);
  spec.simulation = read_simulation(r);
  r.finish();
  return spec;
}

struct SweepRequest {
  std::string spec_path;
  std::string out_dir;
  unsigned jobs = 1;
};

struct SweepRow {
  std::string arm;
  std::uint64_t seed = 0;
  std::string method;
  std::string status = "ok";
  EvalReport report;
  std::optional<double> lambda;
  double objective_final = 0.0;
  bool has_objective = false;
  int iterations = 0;
  bool converged = false;
};

inline std::vector<std::string> sweep_header() {
  return {"arm", "seed", "method", "status", "1-corr", "Sp", "Sens", "Spec", "AUC",
          "lambda", "objective", "iterations", "converged"};
}

inline std::vector<std::string> sweep_cells(const SweepRow& r) {
  const bool ok = r.status == "ok";
  auto num = [&](double x) { return ok ? format_double(x) : std::string(); };
  return {r.arm,
          std::to_string(r.seed),
          r.method,
          r.status,
          num(r.report.one_minus_corr),
          num(r.report.sparseness_pct),
          num(r.report.sensitivity_pct),
          num(r.report.specificity_pct),
          num(r.report.auc_pct),
          ok && r.lambda ? format_double(*r.lambda) : std::string(),
          ok && r.has_objective ? format_double(r.objective_final) : std::string(),
          ok ? std::to_string(r.iterations) : std::string(),
          ok ? (r.converged ? "true" : "false") : std::string()};
}

inline int cmd_sweep(const SweepRequest& req, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    if (req.spec_path.empty()) throw ConfigError("sweep needs --spec");
    if (!fs::exists(req.spec_path)) throw ConfigError("sweep spec not found: " + req.spec_path);
    const SweepSpec spec = parse_sweep(io::read_key_values(req.spec_path));
    const fs::path out = resolve_out_dir(req.out_dir, "sweep");
    ensure_dir(out);

    std::vector<SimulationOutput> phantoms;
    for (std::uint64_t seed : spec.seeds) {
      SimulationSettings s = spec.simulation;
      s.seed = seed;
      phantoms.push_back(run_simulation(s));
    }

    const std::size_t n_runs = spec.arms.size() * spec.seeds.size();
    std::vector<SweepRow> rows(n_runs);
    parallel_for(n_runs, req.jobs, [&](std::size_t job) {
      const SweepArm& arm = spec.arms[job / spec.seeds.size()];
      const std::size_t si = job % spec.seeds.size();
      SweepRow& row = rows[job];
      row.arm = arm.name;
      row.seed = spec.seeds[si];
      row.method = arm.settings.at("method");
      try {
        const io::KeyValueConfig arm_cfg = as_config(arm.settings, "arm " + arm.name);
        Reader r(arm_cfg);
        SolveSettings s = read_solve(r);
        r.finish();
        s.solver.jobs = 1;
        s.mm.jobs = 1;
        const SimulationOutput& sim = phantoms[si];
        const ProblemData data(sim.phantom.K, sim.noisy.V);
        const auto t0 = std::chrono::steady_clock::now();
        const SolveOutcome o = run_solve(data, s);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.report = evaluate(row.method, o.mu, sim.phantom.J_true, sim.phantom.support_true,
                              default_zero_tol(s.method));
        row.lambda = o.lambda_used;
        row.has_objective = !o.objective_trace.empty();
        if (row.has_objective) row.objective_final = o.objective_trace.back();
        row.iterations = o.iterations;
        row.converged = o.converged;
        KeyValues config = to_key_values(s);
        config.erase("K");
        config.erase("V");
        write_solve_outputs(out / arm.name / ("seed-" + std::to_string(row.seed)), config, o, secs, false);
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
    });

    std::string table = csv_row(sweep_header());
    json m;
    m["format_version"] = kManifestVersion;
    m["command"] = "sweep";
    m["config"]["simulation"] = kv_json(to_key_values(spec.simulation));
    m["config"]["seeds"] = spec.seeds;
    for (const auto& arm : spec.arms) m["config"]["arms"][arm.name] = kv_json(arm.settings);
    m["rows"] = json::array();
    int failures = 0;
    for (const SweepRow& row : rows) {
      table += csv_row(sweep_cells(row));
      const auto cells = sweep_cells(row);
      const auto header = sweep_header();
      json jr;
      for (std::size_t i = 0; i < header.size(); ++i) jr[header[i]] = cells[i];
      m["rows"].push_back(std::move(jr));
      if (row.status != "ok") {
        ++failures;
        err << "warning: arm " << row.arm << " seed " << row.seed << ": " << row.status << '\n';
      }
    }
    write_text(out / "sweep.csv", table);
    write_text(out / "manifest.json", m.dump(2) + "\n");
    if (failures) err << failures << " of " << rows.size() << " runs failed; see sweep.csv\n";
    return kExitOk;
  });
}

}  // namespace ebsl::cli
