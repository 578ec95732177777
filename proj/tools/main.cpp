#include "qnipm/bench.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

using namespace qnipm;

nlohmann::json options_json(const SolverOptions& o, const QuadraticProgram& qp) {
  nlohmann::json j;
  j["mode"] = to_string(o.mode);
  j["update"] = to_string(o.update_kind);
  j["ell_max"] = o.ell_max;
  j["eps_c"] = o.eps_c;
  if (o.eps_alpha) j["eps_alpha"] = *o.eps_alpha;
  j["tol_opt"] = o.tol_opt;
  j["tol_p"] = o.tol_p;
  j["tol_d"] = o.resolved_tol_d(qp);
  j["max_iter"] = o.max_iter;
  j["tau"] = o.tau;
  j["max_correctors"] = o.max_correctors;
  j["reg_base"] = o.reg_base;
  j["gentle_sigma"] = o.gentle_sigma;
  j["mehrotra"] = o.mehrotra;
  j["sparse_backend"] = o.sparse_backend;
  return j;
}

nlohmann::json report_json(const SolverReport& rep, const SolverOptions& opts,
                           const QuadraticProgram& qp, double recovered_obj) {
  nlohmann::json j;
  j["options"] = options_json(opts, qp);
  j["problem"] = {{"name", qp.name}, {"n", qp.n}, {"m", qp.m}};
  j["status"] = to_string(rep.status);
  j["message"] = rep.message;
  j["iterations"] = rep.iterations;
  j["factorizations"] = rep.factorizations;
  j["backsolves"] = rep.backsolves;
  j["qn_steps"] = rep.qn_steps;
  j["newton_steps"] = rep.newton_steps;
  j["objective"] = recovered_obj;
  j["objective_standard_form"] = rep.objective;
  j["residuals"] = {{"primal_inf", rep.final_residuals.primal_inf},
                    {"dual_inf", rep.final_residuals.dual_inf},
                    {"opt_gap", rep.final_residuals.opt_gap}};
  j["trace"] = nlohmann::json::array();
  for (const IterationTraceRow& r : rep.trace) {
    j["trace"].push_back({{"k", r.k},
                          {"step", std::string(1, r.step)},
                          {"mu", r.mu},
                          {"alpha_p", r.alpha_p},
                          {"alpha_d", r.alpha_d},
                          {"sigma", r.sigma},
                          {"ell", r.ell},
                          {"stored", r.stored},
                          {"correctors", r.correctors},
                          {"corrector_probes", r.corrector_probes},
                          {"primal_inf", r.primal_inf},
                          {"dual_inf", r.dual_inf},
                          {"opt_gap", r.opt_gap},
                          {"min_x", r.min_x},
                          {"min_z", r.min_z},
                          {"rp", r.rp},
                          {"max_blocking", r.max_blocking}});
  }
  return j;
}

std::vector<std::string> collect_instances(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    for (char& ch : ext) ch = static_cast<char>(std::tolower(ch));
    if (ext == ".mps" || ext == ".qps") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

int cmd_solve(const std::string& file, SolverOptions opts,
              const std::string& trace_path) {
  RawProblem raw = parse_qps_file(file);
  auto [qp, rec] = to_standard_form(raw);
  SolverReport rep = solve(qp, opts);
  RecoveredSolution sol = recover_solution(rec, qp, rep.x, rep.lambda);

  std::cout << "problem          " << (raw.name.empty() ? file : raw.name) << "\n"
            << "standard form    n=" << qp.n << " m=" << qp.m << "\n"
            << "mode             " << to_string(opts.mode) << " (update "
            << to_string(opts.update_kind) << ", lmax " << opts.ell_max << ")\n"
            << "status           " << to_string(rep.status)
            << (rep.message.empty() ? "" : " (" + rep.message + ")") << "\n"
            << "iterations       " << rep.iterations << " (" << rep.newton_steps
            << " newton, " << rep.qn_steps << " quasi-newton)\n"
            << "factorizations   " << rep.factorizations << "\n"
            << "backsolves       " << rep.backsolves << "\n"
            << "objective        " << std::setprecision(12) << sol.objective << "\n"
            << "primal inf       " << rep.final_residuals.primal_inf << "\n"
            << "dual inf         " << rep.final_residuals.dual_inf << "\n"
            << "optimality gap   " << rep.final_residuals.opt_gap << "\n";

  if (!trace_path.empty()) {
    std::ofstream out(trace_path);
    if (!out) throw std::runtime_error("cannot write trace file " + trace_path);
    out << report_json(rep, opts, qp, sol.objective).dump(2) << "\n";
    std::cout << "trace written to " << trace_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quasi-Newton interior point solver for convex QPs and LPs"};
  app.require_subcommand(1);

  std::string mode_str = "qn", update_str = "u2", trace_path;
  SolverOptions opts;
  double tol_d_in = -1.0, eps_alpha_in = -1.0;

  auto add_solver_flags = [&](CLI::App* cmd) {
    cmd->add_option("--mode", mode_str, "newton|newton-mc|qn|qn-mc")
        ->default_str("qn");
    cmd->add_option("--update", update_str, "u1|u2|u3")->default_str("u2");
    cmd->add_option("--lmax", opts.ell_max, "secant memory bound");
    cmd->add_option("--eps-c", opts.eps_c, "centrality store threshold");
    cmd->add_option("--eps-alpha", eps_alpha_in,
                    "step-size store threshold (replaces --eps-c rule)");
    cmd->add_option("--max-iter", opts.max_iter, "iteration limit");
    cmd->add_option("--tol-opt", opts.tol_opt, "optimality gap tolerance");
    cmd->add_option("--tol-p", opts.tol_p, "primal infeasibility tolerance");
    cmd->add_option("--tol-d", tol_d_in, "dual infeasibility tolerance");
    cmd->add_option("--tau", opts.tau, "fraction-to-boundary factor");
    cmd->add_option("--correctors", opts.max_correctors,
                    "max centrality corrector rounds");
    cmd->add_flag("--gentle-sigma", opts.gentle_sigma,
                  "sigma=0.9 on quasi-Newton steps");
    cmd->add_flag_function(
        "--plain-centering",
        [&]([[maybe_unused]] std::int64_t count) { opts.mehrotra = false; },
        "centering corrector without the second-order term");
    cmd->add_flag("--sparse", opts.sparse_backend, "sparse LDLT backend");
  };

  auto* solve_cmd = app.add_subcommand("solve", "solve one MPS/QPS instance");
  std::string file;
  solve_cmd->add_option("file", file, "instance path")->required();
  add_solver_flags(solve_cmd);
  solve_cmd->add_option("--trace", trace_path, "write a JSON run report");

  auto* bench_cmd = app.add_subcommand("bench", "run an instance suite across modes");
  std::string dir, generate_spec, modes_str = "newton,qn";
  std::string metric_str = "factorizations", csv_path, json_path, profile_path;
  double relax = 0.0;
  int threads = 0;
  GeneratorSpec gen;
  bench_cmd->add_option("dir", dir, "directory of .mps/.qps instances");
  bench_cmd->add_option("--generate", generate_spec,
                        "seed,count,n,m random instance spec");
  bench_cmd->add_option("--lp-count", gen.lp_count,
                        "how many generated instances are LPs");
  bench_cmd->add_option("--density", gen.density, "generator fill density");
  bench_cmd->add_option("--modes", modes_str, "comma-separated mode list");
  bench_cmd->add_option("--metric", metric_str, "factorizations|time");
  bench_cmd->add_option("--csv", csv_path, "suite CSV output path");
  bench_cmd->add_option("--json", json_path, "suite JSON output path");
  bench_cmd->add_option("--profile-csv", profile_path,
                        "performance profile CSV output path");
  bench_cmd->add_option("--relax", relax,
                        "re-run failed rows with tolerances scaled by this factor");
  bench_cmd->add_option("--threads", threads, "worker threads (0 = auto)");
  add_solver_flags(bench_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (auto mode = mode_from_string(mode_str))
      opts.mode = *mode;
    else
      throw std::runtime_error("unknown mode '" + mode_str + "'");
    if (auto upd = update_kind_from_string(update_str))
      opts.update_kind = *upd;
    else
      throw std::runtime_error("unknown update kind '" + update_str + "'");
    if (tol_d_in >= 0.0) opts.tol_d = tol_d_in;
    if (eps_alpha_in >= 0.0) opts.eps_alpha = eps_alpha_in;

    if (app.got_subcommand(solve_cmd)) return cmd_solve(file, opts, trace_path);

    // bench
    std::vector<SuiteJob> jobs;
    std::vector<SuiteRow> load_failures;
    std::uint64_t seed = 0;
    if (!generate_spec.empty()) {
      unsigned long long s;
      int count, n, m;
      if (std::sscanf(generate_spec.c_str(), "%llu,%d,%d,%d", &s, &count, &n, &m) != 4)
        throw std::runtime_error("--generate expects seed,count,n,m");
      gen.seed = s;
      gen.count = count;
      gen.max_n = n;
      gen.max_m = m;
      seed = gen.seed;
      jobs = generate_jobs(gen);
    } else if (!dir.empty()) {
      auto paths = collect_instances(dir);
      if (paths.empty()) throw std::runtime_error("no .mps/.qps files in " + dir);
      jobs = load_jobs(paths, &load_failures);
    } else {
      throw std::runtime_error("bench needs a directory or --generate");
    }

    std::vector<std::pair<std::string, SolverOptions>> modes;
    std::stringstream ss(modes_str);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      auto mode = mode_from_string(tok);
      if (!mode) throw std::runtime_error("unknown mode '" + tok + "'");
      SolverOptions mode_opts = opts;
      mode_opts.mode = *mode;
      modes.emplace_back(tok, mode_opts);
    }
    if (modes.empty()) throw std::runtime_error("--modes list is empty");

    SuiteReport report = run_suite(jobs, modes, threads, relax);
    report.seed = seed;
    report.rows.insert(report.rows.end(), load_failures.begin(), load_failures.end());

    ProfileMetric metric = ProfileMetric::Factorizations;
    if (metric_str == "time")
      metric = ProfileMetric::Time;
    else if (metric_str != "factorizations")
      throw std::runtime_error("unknown metric '" + metric_str + "'");

    std::cout << suite_csv(report);
    if (!csv_path.empty()) {
      std::ofstream out(csv_path);
      if (!out) throw std::runtime_error("cannot write " + csv_path);
      out << suite_csv(report);
    }
    if (!json_path.empty()) {
      std::ofstream out(json_path);
      if (!out) throw std::runtime_error("cannot write " + json_path);
      out << suite_json(report) << "\n";
    }
    if (!profile_path.empty()) {
      std::ofstream out(profile_path);
      if (!out) throw std::runtime_error("cannot write " + profile_path);
      out << profile_csv(perf_profile(report, metric));
    }

    bool any_crash = !load_failures.empty();
    for (const SuiteRow& r : report.rows) any_crash |= !r.error.empty();
    return any_crash ? 1 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
