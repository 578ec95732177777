#include "qnipm/bench.hpp"

#include "qnipm/rng.hpp"

#include <json.hpp>

#include <Eigen/Cholesky>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

namespace qnipm {

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

QuadraticProgram generate_qp(std::uint64_t seed, int n, int m, double density,
                             bool lp) {
  if (n <= m || m < 0) throw std::invalid_argument("generate_qp requires n > m >= 0");
  std::mt19937_64 rng(seed);

  QuadraticProgram qp;
  qp.n = n;
  qp.m = m;
  qp.name = "gen-" + std::to_string(seed) + "-" + std::to_string(n) + "x" +
            std::to_string(m) + (lp ? "-lp" : "-qp");

  // A: one guaranteed entry per row keeps rows nonzero; full row rank is
  // rejection-checked through Cholesky of AA'.
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 10)
      throw std::runtime_error("generate_qp: could not draw a full-row-rank A");
    std::vector<Triplet> trips;
    for (int i = 0; i < m; ++i) {
      trips.emplace_back(i, i, uniform(rng, 0.5, 2.0));
      for (int j = 0; j < n; ++j)
        if (j != i && uniform01(rng) < density)
          trips.emplace_back(i, j, uniform(rng, -1.0, 1.0));
    }
    qp.A.resize(m, n);
    qp.A.setFromTriplets(trips.begin(), trips.end());
    if (m == 0) break;
    Mat aat = Mat(qp.A * qp.A.transpose());
    Eigen::LLT<Mat> llt(aat);
    if (llt.info() == Eigen::Success &&
        Vec(llt.matrixL().toDenseMatrix().diagonal()).minCoeff() >
            1e-6 * std::sqrt(aat.diagonal().maxCoeff()))
      break;
  }

  // Q = LL' + delta I on a sparse lower-triangular draw
  qp.Q.resize(n, n);
  if (!lp) {
    std::vector<Triplet> ltrips;
    for (int j = 0; j < n; ++j)
      for (int i = j; i < n; ++i)
        if (i == j || uniform01(rng) < density * 0.5)
          ltrips.emplace_back(i, j, uniform(rng, -0.7, 0.7));
    SpMat L(n, n);
    L.setFromTriplets(ltrips.begin(), ltrips.end());
    SpMat Q = SpMat(L * L.transpose());
    for (int i = 0; i < n; ++i) Q.coeffRef(i, i) += 1e-2;
    qp.Q = Q;
  }

  // planted KKT point: x* positive on a support set, z* positive off it
  Vec xstar = Vec::Zero(n), zstar = Vec::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (uniform01(rng) < 0.6)
      xstar[j] = uniform(rng, 0.5, 1.5);
    else
      zstar[j] = uniform(rng, 0.2, 1.2);
  }
  if (xstar.maxCoeff() == 0.0) xstar[0] = 1.0;  // keep b nontrivial
  Vec lambda_star(m);
  for (int i = 0; i < m; ++i) lambda_star[i] = uniform(rng, -1.0, 1.0);
  qp.b = qp.A * xstar;
  qp.c = qp.A.transpose() * lambda_star + zstar - qp.Q * xstar;
  qp.validate();
  return qp;
}

std::vector<SuiteJob> generate_jobs(const GeneratorSpec& spec) {
  std::vector<SuiteJob> jobs;
  std::mt19937_64 seq(spec.seed);
  for (int i = 0; i < spec.count; ++i) {
    std::uint64_t inst_seed = seq();
    bool lp = i < spec.lp_count;
    int n = spec.max_n / 2 + static_cast<int>(uniform_index(seq, spec.max_n - spec.max_n / 2 + 1));
    int max_m = std::min(spec.max_m, n - 1);
    int m = std::max(1, max_m / 2 + static_cast<int>(uniform_index(seq, max_m - max_m / 2 + 1)));
    SuiteJob job;
    job.qp = generate_qp(inst_seed, n, m, spec.density, lp);
    job.name = job.qp.name;
    jobs.push_back(std::move(job));
  }
  return jobs;
}

std::vector<SuiteJob> load_jobs(const std::vector<std::string>& paths,
                                std::vector<SuiteRow>* load_failures) {
  std::vector<SuiteJob> jobs;
  for (const std::string& path : paths) {
    try {
      RawProblem raw = parse_qps_file(path);
      auto [qp, rec] = to_standard_form(raw);
      SuiteJob job;
      job.name = raw.name.empty() ? path : raw.name;
      job.qp = std::move(qp);
      job.record = std::move(rec);
      jobs.push_back(std::move(job));
    } catch (const std::exception& e) {
      if (!load_failures) throw;
      SuiteRow row;
      row.problem = path;
      row.mode = "-";
      row.status = "load_error";
      row.error = e.what();
      load_failures->push_back(std::move(row));
    }
  }
  return jobs;
}

namespace {

SuiteRow run_one(const SuiteJob& job, const std::string& mode_name,
                 SolverOptions opts, bool relaxed, double relax_factor) {
  SuiteRow row;
  row.problem = job.name;
  row.mode = mode_name;
  row.relaxed = relaxed;
  if (relaxed) {
    opts.tol_opt *= relax_factor;
    opts.tol_p *= relax_factor;
    opts.tol_d = opts.resolved_tol_d(job.qp) * relax_factor;
  }
  auto t0 = std::chrono::steady_clock::now();
  try {
    SolverReport rep = solve(job.qp, opts);
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.status = to_string(rep.status);
    row.iterations = rep.iterations;
    row.factorizations = rep.factorizations;
    row.backsolves = rep.backsolves;
    row.objective = rep.objective;
    if (job.record)
      row.objective =
          recover_solution(*job.record, job.qp, rep.x, rep.lambda).objective;
    // independent verification of the returned point, not the solver status
    IterateState final_it = IterateState::make(rep.x, rep.lambda, rep.z);
    Residuals res = residuals(job.qp, final_it);
    row.primal_inf = res.primal_inf;
    row.dual_inf = res.dual_inf;
    row.opt_gap = res.opt_gap;
    row.solved = res.primal_inf <= opts.tol_p &&
                 res.dual_inf <= opts.resolved_tol_d(job.qp) &&
                 res.opt_gap <= opts.tol_opt;
  } catch (const std::exception& e) {
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.status = "error";
    row.error = e.what();
  }
  return row;
}

}  // namespace

SuiteReport run_suite(const std::vector<SuiteJob>& jobs,
                      const std::vector<std::pair<std::string, SolverOptions>>& modes,
                      int threads, double relax_failed) {
  SuiteReport report;
  const size_t total = jobs.size() * modes.size();
  report.rows.resize(total);
  if (total == 0) return report;

  if (threads <= 0)
    threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(total)));

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      size_t idx = next.fetch_add(1);
      if (idx >= total) break;
      const SuiteJob& job = jobs[idx / modes.size()];
      const auto& [mode_name, opts] = modes[idx % modes.size()];
      report.rows[idx] = run_one(job, mode_name, opts, false, 1.0);
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  if (relax_failed > 0.0) {
    for (size_t idx = 0; idx < total; ++idx) {
      SuiteRow& row = report.rows[idx];
      if (row.solved || !row.error.empty()) continue;
      const SuiteJob& job = jobs[idx / modes.size()];
      const auto& [mode_name, opts] = modes[idx % modes.size()];
      row = run_one(job, mode_name, opts, true, relax_failed);
    }
  }
  return report;
}

std::vector<ProfileCurve> perf_profile(const SuiteReport& report,
                                       ProfileMetric metric) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::string> problems, modes;
  for (const SuiteRow& r : report.rows) {
    if (std::find(problems.begin(), problems.end(), r.problem) == problems.end())
      problems.push_back(r.problem);
    if (std::find(modes.begin(), modes.end(), r.mode) == modes.end())
      modes.push_back(r.mode);
  }
  auto metric_of = [&](const SuiteRow& r) {
    if (!r.solved) return kInf;
    double v = metric == ProfileMetric::Factorizations
                   ? static_cast<double>(r.factorizations)
                   : r.wall_seconds;
    return std::max(v, 1e-9);  // zero-cost rows would break the ratios
  };

  // ratios[mode][problem]
  std::vector<std::vector<double>> ratios(modes.size(),
                                          std::vector<double>(problems.size(), kInf));
  for (size_t p = 0; p < problems.size(); ++p) {
    double best = kInf;
    std::vector<double> vals(modes.size(), kInf);
    for (const SuiteRow& r : report.rows) {
      if (r.problem != problems[p]) continue;
      size_t mi = std::find(modes.begin(), modes.end(), r.mode) - modes.begin();
      vals[mi] = metric_of(r);
      best = std::min(best, vals[mi]);
    }
    for (size_t mi = 0; mi < modes.size(); ++mi)
      ratios[mi][p] = std::isfinite(vals[mi]) && std::isfinite(best)
                          ? vals[mi] / best
                          : kInf;
  }

  std::vector<ProfileCurve> curves;
  for (size_t mi = 0; mi < modes.size(); ++mi) {
    ProfileCurve curve;
    curve.mode = modes[mi];
    std::vector<double> finite;
    for (double r : ratios[mi])
      if (std::isfinite(r)) finite.push_back(r);
    std::sort(finite.begin(), finite.end());
    const double np = static_cast<double>(problems.size());
    double prev_tau = -1.0;
    for (size_t i = 0; i < finite.size(); ++i) {
      if (finite[i] == prev_tau) {
        curve.points.back().second = static_cast<double>(i + 1) / np;
      } else {
        curve.points.emplace_back(finite[i], static_cast<double>(i + 1) / np);
        prev_tau = finite[i];
      }
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

std::string suite_csv(const SuiteReport& report) {
  std::ostringstream out;
  out << "problem,mode,status,solved,iterations,factorizations,backsolves,"
         "wall_seconds,objective,primal_inf,dual_inf,opt_gap,relaxed,error\n";
  for (const SuiteRow& r : report.rows) {
    out << csv_escape(r.problem) << ',' << r.mode << ',' << r.status << ','
        << (r.solved ? 1 : 0) << ',' << r.iterations << ',' << r.factorizations
        << ',' << r.backsolves << ',' << fmt(r.wall_seconds) << ','
        << fmt(r.objective) << ',' << fmt(r.primal_inf) << ',' << fmt(r.dual_inf)
        << ',' << fmt(r.opt_gap) << ',' << (r.relaxed ? 1 : 0) << ','
        << csv_escape(r.error) << "\n";
  }
  return out.str();
}

std::string suite_json(const SuiteReport& report) {
  nlohmann::json j;
  j["seed"] = report.seed;
  j["note"] = report.note;
  j["rows"] = nlohmann::json::array();
  for (const SuiteRow& r : report.rows) {
    nlohmann::json row;
    row["problem"] = r.problem;
    row["mode"] = r.mode;
    row["status"] = r.status;
    row["solved"] = r.solved;
    row["iterations"] = r.iterations;
    row["factorizations"] = r.factorizations;
    row["backsolves"] = r.backsolves;
    row["wall_seconds"] = r.wall_seconds;
    row["objective"] = r.objective;
    row["primal_inf"] = r.primal_inf;
    row["dual_inf"] = r.dual_inf;
    row["opt_gap"] = r.opt_gap;
    row["relaxed"] = r.relaxed;
    row["error"] = r.error;
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2);
}

std::string profile_csv(const std::vector<ProfileCurve>& curves) {
  std::ostringstream out;
  out << "mode,tau,rho\n";
  for (const ProfileCurve& c : curves)
    for (auto& [tau, rho] : c.points)
      out << c.mode << ',' << fmt(tau) << ',' << fmt(rho) << "\n";
  return out.str();
}

}  // namespace qnipm
