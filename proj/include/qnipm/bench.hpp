#pragma once

#include "qnipm/ipm.hpp"

#include <cstdint>
#include <map>
#include <optional>

namespace qnipm {

struct SuiteRow {
  std::string problem;
  std::string mode;
  std::string status;
  bool solved = false;  // independent residual re-verification, not solver status
  int iterations = 0;
  int factorizations = 0;
  std::uint64_t backsolves = 0;
  double wall_seconds = 0.0;
  double objective = 0.0;  // original-variable objective where a transform exists
  double primal_inf = 0.0, dual_inf = 0.0, opt_gap = 0.0;
  bool relaxed = false;  // re-run at 100x tolerances
  std::string error;     // parse/solve exception text; empty on success
};

struct SuiteReport {
  std::vector<SuiteRow> rows;
  std::uint64_t seed = 0;
  std::string note;
};

struct GeneratorSpec {
  std::uint64_t seed = 1;
  int count = 10;
  int max_n = 40;   // per-instance n drawn in [max_n/2, max_n]
  int max_m = 20;   // per-instance m drawn in [max_m/2, max_m], m < n
  double density = 0.4;
  int lp_count = 0;  // this many instances get Q = 0
};

// Random standard-form instance with a planted KKT point: A full row rank
// (rejection-checked via Cholesky of AA', <= 10 redraws), Q = LL' + delta I,
// b = A x* for a positive x*, c = A' lambda* + z* - Q x* with z* >= 0
// supported off x*. Same seed, same bytes.
QuadraticProgram generate_qp(std::uint64_t seed, int n, int m, double density,
                             bool lp = false);

struct SuiteJob {
  std::string name;
  QuadraticProgram qp;                    // standard form
  std::optional<TransformRecord> record;  // present for file-loaded jobs
};

std::vector<SuiteJob> load_jobs(const std::vector<std::string>& paths,
                                std::vector<SuiteRow>* load_failures = nullptr);
std::vector<SuiteJob> generate_jobs(const GeneratorSpec& spec);

// Solves every job under every mode with identical tolerances; one row per
// (job, mode). "solved" re-checks the returned point against the stopping
// tolerances via kernel residuals, independent of the solver's own status.
// Per-job failures become rows with error text; the suite never aborts.
// relax_failed re-runs rows that failed verification with tolerances
// multiplied by that factor (the relaxed protocol); 0 disables.
SuiteReport run_suite(const std::vector<SuiteJob>& jobs,
                      const std::vector<std::pair<std::string, SolverOptions>>& modes,
                      int threads = 0, double relax_failed = 0.0);

// Dolan-More profile: per problem, ratio = metric / best across modes
// (+inf when unsolved); curve rho(tau) = fraction of problems at ratio <=
// tau. Curves are nondecreasing; the right endpoint is the robustness
// fraction.
enum class ProfileMetric { Factorizations, Time };

struct ProfileCurve {
  std::string mode;
  std::vector<std::pair<double, double>> points;  // (tau, rho), steps
};

std::vector<ProfileCurve> perf_profile(const SuiteReport& report, ProfileMetric metric);

// CSV column order (documented in the README):
// problem,mode,status,solved,iterations,factorizations,backsolves,
// wall_seconds,objective,primal_inf,dual_inf,opt_gap,relaxed,error
std::string suite_csv(const SuiteReport& report);
std::string suite_json(const SuiteReport& report);
std::string profile_csv(const std::vector<ProfileCurve>& curves);

}  // namespace qnipm
