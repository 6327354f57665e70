#pragma once

// Batch driver: validation, single runs and parameter sweeps with CSV output.

#include "gne/async_sim.hpp"
#include "gne/benchmarks.hpp"
#include "gne/config.hpp"
#include "gne/diagnostics.hpp"
#include "gne/operators.hpp"
#include "gne/sync_solver.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace gne {

enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_config = 2, exit_diverged = 3 };

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline bool is_async_mode(const std::string& mode) { return mode == "async" || mode == "async-fb"; }

inline std::vector<std::string> csv_columns(const std::string& mode) {
  std::vector<std::string> cols{"k", "primal_res", "dual_res", "fp_res_sq", "dist_sq"};
  if (is_async_mode(mode)) {
    cols.emplace_back("phi");
    cols.emplace_back("activation");
    cols.emplace_back("max_delay_seen");
  }
  return cols;
}

inline void write_csv(std::ostream& os, const RunRecord& rec) {
  const bool async = is_async_mode(rec.mode);
  const auto cols = csv_columns(rec.mode);
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
  os << '\n';
  for (const auto& r : rec.rows) {
    os << r.k << ',' << fmt_double(r.primal) << ',' << fmt_double(r.dual) << ','
       << fmt_double(r.fp_res_sq) << ',' << fmt_double(r.dist_sq);
    if (async) {
      os << ',' << fmt_double(r.phi) << ',';
      if (r.activation >= 0) os << r.activation;
      os << ',';
      if (r.max_delay >= 0) os << r.max_delay;
    }
    os << '\n';
  }
}

/// Parses a record written by write_csv. Empty fields read back as absent.
inline RunRecord read_csv(std::istream& is, const std::string& mode) {
  RunRecord rec;
  rec.mode = mode;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty record");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) header.push_back(f);
  }
  if (header != csv_columns(mode)) throw std::runtime_error("record header does not match mode " + mode);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != header.size()) throw std::runtime_error("ragged record row: " + line);
    auto num = [](const std::string& t) { return t.empty() ? absent : std::strtod(t.c_str(), nullptr); };
    RunRow r;
    r.k = std::stol(f[0]);
    r.primal = num(f[1]);
    r.dual = num(f[2]);
    r.fp_res_sq = num(f[3]);
    r.dist_sq = num(f[4]);
    if (f.size() > 5) {
      r.phi = num(f[5]);
      r.activation = f[6].empty() ? -1 : std::stoi(f[6]);
      r.max_delay = f[7].empty() ? -1 : std::stoi(f[7]);
    }
    rec.rows.push_back(r);
  }
  return rec;
}

/// Default output directory: $GNE_OUT_DIR, else the working directory.
inline std::filesystem::path default_out_dir() {
  const char* env = std::getenv("GNE_OUT_DIR");
  return env && *env ? std::filesystem::path(env) : std::filesystem::current_path();
}

// ---------------------------------------------------------------------------

struct Validation {
  StepReport steps;
  double pd_min_eig = absent;
  bool pd_checked = false;
  bool ok = false;
  bool sync_ok = false;  // everything except the async constant beta
};

inline Validation validate_problem(const Problem& p) {
  Validation v;
  v.steps = validate(p.steps, p.game, p.graph, p.constants);
  bool players_ok = v.steps.alpha_ok && v.steps.edges_ok && v.steps.probs_ok;
  for (const auto& pc : v.steps.players) players_ok = players_ok && pc.sigma_ok && pc.tau_ok;
  bool pd_ok = true;
  const auto dim = p.game.total_dim() + p.game.players() * p.game.coupling_rows() +
                   2 * p.graph.edge_count() * p.game.coupling_rows();
  if (players_ok && dim <= dense_size_limit) {
    v.pd_min_eig = check_pd_certificate(assemble_matrices(p.game, p.graph, p.steps, p.constants));
    v.pd_checked = true;
    pd_ok = v.pd_min_eig > 0.0;
  }
  v.sync_ok = players_ok && pd_ok;
  v.ok = v.steps.ok && pd_ok;
  return v;
}

inline void print_validation(std::ostream& os, const Problem& p, const Validation& v) {
  os << "players=" << p.game.players() << " n=" << p.game.total_dim()
     << " q=" << p.game.coupling_rows() << " edges=" << p.graph.edge_count()
     << " mu=" << p.constants.mu << " L_F=" << p.constants.l_f << " eta=" << p.steps.eta
     << " eps=" << p.steps.eps << '\n';
  os << "step sizes: " << v.steps.summary() << '\n';
  if (v.pd_checked)
    os << "certificate: lambda_min=" << v.pd_min_eig << (v.pd_min_eig > 0.0 ? " pass" : " fail") << '\n';
  else
    os << "certificate: skipped\n";
  os << (v.ok ? "valid" : "invalid") << '\n';
}

inline int cmd_validate(const std::string& path, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  try {
    const Config c = load_config(path);
    const Problem p = materialize(c);
    const auto v = validate_problem(p);
    print_validation(out, p, v);
    return v.ok ? exit_ok : exit_validation;
  } catch (const config_error& ex) {
    err << "config error at " << ex.what() << '\n';
    return exit_config;
  }
}

// ---------------------------------------------------------------------------

struct RunOutcome {
  RunRecord record;
  json verdicts;
};

inline json step_report_json(const Validation& val) {
  const auto& r = val.steps;
  json players = json::array();
  for (const auto& pc : r.players)
    players.push_back({{"player", pc.player},
                       {"sigma_bound", pc.sigma_bound},
                       {"sigma_ok", pc.sigma_ok},
                       {"tau_bound", pc.tau_bound},
                       {"tau_ok", pc.tau_ok},
                       {"tau_literal", pc.tau_literal}});
  return {{"kappa_ts", r.kappa_ts},
          {"beta", r.beta},
          {"gamma", r.gamma},
          {"ok", r.ok},
          {"pd_min_eig", val.pd_checked ? json(val.pd_min_eig) : json(nullptr)},
          {"players", players},
          {"problems", r.problems}};
}

/// Solves the oracle, runs the chosen solver against it and collects verdicts.
/// `val` is the step validation; a run whose mode it does not cover is
/// tagged unvalidated.
inline RunOutcome run_problem(const Problem& p, const Config& c, const std::string& mode,
                              const Validation& val) {
  RunOutcome out;
  const auto oracle = solve_oracle(p.game, p.graph, p.steps);
  const Reference& ref = oracle.ref;
  const StopRule stop = stop_rule(c);
  const bool validated = is_async_mode(mode) ? val.ok : val.sync_ok;
  json v{{"mode", mode}, {"oracle_agreement", oracle.agreement}, {"validated", validated},
         {"steps", step_report_json(val)}};

  if (is_async_mode(mode)) {
    AsyncOptions opt;
    opt.variant = mode == "async" ? Variant::standard : Variant::forward_backward;
    auto r = async_run(p.game, p.graph, p.steps, std::nullopt, scheduler_config(c, p.steps), stop, &ref, opt);
    out.record = std::move(r.record);
  } else {
    const Variant var = mode == "sync" ? Variant::standard : Variant::forward_backward;
    auto r = sync_run(p.game, p.graph, p.steps, std::nullopt, stop, &ref, var);
    out.record = std::move(r.record);
    if (var == Variant::standard && stop.record_stride == 1) {
      const double gamma = p.steps.gamma();
      const auto fj = check_fejer(out.record, gamma);
      const auto rt = check_rate(out.record, gamma);
      v["fejer"] = {{"ok", fj.ok}, {"failing_k", fj.failing_k}, {"worst_slack", fj.worst}};
      v["rate"] = {{"ok", rt.ok},
                   {"monotone", rt.monotone},
                   {"bound", rt.bound},
                   {"failing_k", rt.failing_k},
                   {"slope", std::isnan(rt.slope) ? json(nullptr) : json(rt.slope)}};
    }
    const auto kkt = check_kkt(r.state, p.game, p.graph, std::max(10.0 * stop.tol, 1e-7));
    v["kkt"] = {{"ok", kkt.ok}, {"summary", kkt.summary()}};
  }
  out.record.validated = validated;
  const auto& rec = out.record;
  v["converged"] = rec.converged;
  v["iterations"] = rec.iterations;
  v["final_primal"] = rec.final_primal;
  v["final_dual"] = rec.final_dual;
  v["primal_absolute"] = rec.primal_absolute;
  v["dual_absolute"] = rec.dual_absolute;
  out.verdicts = std::move(v);
  return out;
}

inline void write_outputs(const std::filesystem::path& csv, const RunOutcome& o) {
  if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());
  std::ofstream f(csv, std::ios::binary);
  write_csv(f, o.record);
  std::ofstream j(csv.string() + ".json", std::ios::binary);
  j << o.verdicts.dump(2) << '\n';
}

struct RunOptions {
  std::string mode = "sync";
  std::optional<std::uint64_t> seed;  // overrides benchmark and scheduler seeds
  std::optional<std::string> out;
  bool force = false;
};

inline bool known_mode(const std::string& m) {
  return m == "sync" || m == "async" || m == "sync-fb" || m == "async-fb";
}

inline void apply_seed(Config& c, std::uint64_t seed) {
  if (c.benchmark) c.benchmark->seed = seed;
  c.scheduler.seed = seed;
}

inline int cmd_run(const std::string& path, const RunOptions& o, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  try {
    if (!known_mode(o.mode)) throw config_error("--mode", "unknown mode '" + o.mode + "'");
    Config c = load_config(path);
    if (o.seed) apply_seed(c, *o.seed);
    if (is_async_mode(o.mode) && c.stop.on != "primal")
      throw config_error("/stop/on", "asynchronous modes stop on the primal residual");
    const Problem p = materialize(c);
    const auto v = validate_problem(p);
    const bool ok = is_async_mode(o.mode) ? v.ok : v.sync_ok;
    if (!ok && !o.force) {
      print_validation(err, p, v);
      err << "refusing to run with invalid step sizes (use --force)\n";
      return exit_validation;
    }
    const auto res = run_problem(p, c, o.mode, v);
    const std::filesystem::path csv =
        o.out ? std::filesystem::path(*o.out)
              : default_out_dir() / ("run_" + o.mode + "_seed" + std::to_string(c.scheduler.seed) + ".csv");
    write_outputs(csv, res);
    out << "mode=" << o.mode << " iterations=" << res.record.iterations
        << " primal=" << fmt_double(res.record.final_primal)
        << " dual=" << fmt_double(res.record.final_dual)
        << (res.record.converged ? " converged" : " not converged") << " -> " << csv.string() << '\n';
    return res.record.converged ? exit_ok : exit_diverged;
  } catch (const config_error& ex) {
    err << "config error at " << ex.what() << '\n';
    return exit_config;
  } catch (const oracle_error& ex) {
    err << "oracle failure: " << ex.what() << '\n';
    return exit_diverged;
  }
}

// ---------------------------------------------------------------------------

class validation_failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepOptions {
  std::string vary = "eps";  // eps | pmin
  std::vector<double> values;
  int seeds = 1;
  std::optional<std::string> out_dir;
  std::string mode = "async";
  bool force = false;
  int jobs = 1;
};

struct SweepPoint {
  double value;
  int runs = 0;
  int converged = 0;
  double median_iterations = absent;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return absent;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string value_tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline Config sweep_config(Config c, const std::string& vary, double value, std::uint64_t seed) {
  apply_seed(c, seed);
  if (vary == "eps")
    c.recipe->eps = static_cast<int>(value);
  else
    c.recipe->p_min = value;
  return c;
}

/// Iterations-to-threshold for every (value, seed) pair; non-converged runs
/// count as max_iter. `sink` (optional) receives each finished run.
inline std::vector<SweepPoint> sweep(
    const Config& base, const SweepOptions& o,
    const std::function<void(double, std::uint64_t, const RunOutcome&)>& sink = {}) {
  struct Job {
    std::size_t v;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < o.values.size(); ++v)
    for (int s = 1; s <= o.seeds; ++s) jobs.push_back({v, static_cast<std::uint64_t>(s)});

  std::vector<std::vector<double>> iters(o.values.size());
  std::vector<SweepPoint> pts;
  for (double v : o.values) pts.push_back({v});
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      Job j;
      {
        std::lock_guard lock(mu);
        if (next >= jobs.size() || failure) return;
        j = jobs[next++];
      }
      try {
        const Config c = sweep_config(base, o.vary, o.values[j.v], j.seed);
        const Problem p = materialize(c);
        const auto val = validate_problem(p);
        if (!o.force && !(is_async_mode(o.mode) ? val.ok : val.sync_ok))
          throw validation_failure(o.vary + "=" + value_tag(o.values[j.v]) + ", seed " +
                                   std::to_string(j.seed) + ": step sizes fail validation (use --force)");
        const auto r = run_problem(p, c, o.mode, val);
        std::lock_guard lock(mu);
        auto& pt = pts[j.v];
        pt.runs++;
        if (r.record.converged) pt.converged++;
        iters[j.v].push_back(static_cast<double>(r.record.converged ? r.record.iterations : c.stop.max_iter));
        if (sink) sink(o.values[j.v], j.seed, r);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int nt = std::max(1, std::min<int>(o.jobs, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  for (std::size_t v = 0; v < pts.size(); ++v) pts[v].median_iterations = median(iters[v]);
  return pts;
}

inline int cmd_sweep(const std::string& path, const SweepOptions& o, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
  try {
    if (!known_mode(o.mode)) throw config_error("--mode", "unknown mode '" + o.mode + "'");
    if (o.vary != "eps" && o.vary != "pmin") throw config_error("--vary", "expected 'eps' or 'pmin'");
    if (o.values.empty()) throw config_error("--values", "no values given");
    if (o.seeds < 1) throw config_error("--seeds", "must be at least 1");
    const Config base = load_config(path);
    if (!base.recipe) throw config_error("/recipe", "sweeps vary the recipe; a 'recipe' section is required");
    const auto dir = o.out_dir ? std::filesystem::path(*o.out_dir) : default_out_dir() / "sweep";
    std::filesystem::create_directories(dir);

    const auto pts = sweep(base, o, [&](double v, std::uint64_t seed, const RunOutcome& r) {
      write_outputs(dir / (o.vary + "_" + value_tag(v) + "_seed" + std::to_string(seed) + ".csv"), r);
    });

    std::ofstream sum(dir / "summary.csv", std::ios::binary);
    sum << "vary,value,runs,converged,median_iterations\n";
    bool all = true;
    for (const auto& pt : pts) {
      sum << o.vary << ',' << fmt_double(pt.value) << ',' << pt.runs << ',' << pt.converged << ','
          << fmt_double(pt.median_iterations) << '\n';
      out << o.vary << '=' << value_tag(pt.value) << " median_iterations=" << fmt_double(pt.median_iterations)
          << " converged=" << pt.converged << '/' << pt.runs << '\n';
      all = all && pt.converged == pt.runs;
    }
    return all ? exit_ok : exit_diverged;
  } catch (const validation_failure& ex) {
    err << ex.what() << '\n';
    return exit_validation;
  } catch (const config_error& ex) {
    err << "config error at " << ex.what() << '\n';
    return exit_config;
  } catch (const oracle_error& ex) {
    err << "oracle failure: " << ex.what() << '\n';
    return exit_diverged;
  }
}

/// Writes the replay document for a configuration (explicit game and steps).
inline int cmd_export(const std::string& path, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    const Config c = load_config(path);
    out << to_json(export_config(materialize(c), c)).dump(2) << '\n';
    return exit_ok;
  } catch (const config_error& ex) {
    err << "config error at " << ex.what() << '\n';
    return exit_config;
  }
}

}  // namespace gne
