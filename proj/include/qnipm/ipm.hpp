#pragma once

#include "qnipm/quasinewton.hpp"

#include <optional>
#include <string>

namespace qnipm {

// newton:    factorize every iteration, no centrality correctors
// newton-mc: factorize every iteration, correctors on every step
// qn:        quasi-Newton steps between factorizations, correctors on
//            quasi-Newton steps only
// qn-mc:     quasi-Newton steps, correctors on every step
enum class Mode { Newton, NewtonMc, Qn, QnMc };

const char* to_string(Mode mode);
std::optional<Mode> mode_from_string(const std::string& s);
std::optional<UpdateKind> update_kind_from_string(const std::string& s);

struct SolverOptions {
  Mode mode = Mode::Qn;
  UpdateKind update_kind = UpdateKind::U2;
  int ell_max = 5;
  double eps_c = 0.99;                    // centrality store rule (default)
  std::optional<double> eps_alpha;        // step-size store rule; replaces eps_c when set
  double tol_opt = 1e-10;
  double tol_p = 1e-8;
  std::optional<double> tol_d;            // default: 1e-8 LP, 1e-6 QP
  int max_iter = 200;
  double tau = 0.9995;                    // fraction to boundary
  int max_correctors = 3;
  double reg_base = 1e-8;
  bool gentle_sigma = false;              // sigma = 0.9 on quasi-Newton steps
  bool mehrotra = true;                   // false: plain centering corrector
  bool sparse_backend = false;

  double resolved_tol_d(const QuadraticProgram& qp) const {
    return tol_d ? *tol_d : (qp.is_lp() ? 1e-8 : 1e-6);
  }
};

enum class SolveStatus { Optimal, LackOfImprovement, IterationLimit, InfeasibleSuspected };

const char* to_string(SolveStatus s);

struct IterationTraceRow {
  int k = 0;
  char step = 'N';  // 'N' Newton (fresh factorization), 'Q' quasi-Newton
  double mu = 0.0;
  double alpha_p = 0.0, alpha_d = 0.0;
  double sigma = 0.0;
  int ell = 0;          // chain length used for this step
  bool stored = false;  // secant pair kept afterwards
  int correctors = 0;        // centrality rounds kept
  int corrector_probes = 0;  // centrality rounds computed (one backsolve each)
  double primal_inf = 0.0, dual_inf = 0.0, opt_gap = 0.0;
  double min_x = 0.0, min_z = 0.0;
  double rp = 0.0;  // regularization magnitude in effect
  double max_blocking = 0.0;  // max relative direction component
};

struct SolverReport {
  SolveStatus status = SolveStatus::IterationLimit;
  int iterations = 0;
  int factorizations = 0;
  std::uint64_t backsolves = 0;
  int qn_steps = 0;
  int newton_steps = 0;
  double objective = 0.0;  // standard-form objective at the final iterate
  Residuals final_residuals;
  std::vector<IterationTraceRow> trace;
  Vec x, lambda, z;  // final (interior) iterate, standard form
  std::string message;
};

struct Direction {
  Vec dx, dlambda, dz;
  double sigma = 0.0;
  int correctors = 0;        // centrality rounds kept
  int corrector_probes = 0;  // centrality rounds computed; each cost one backsolve

  Vec stacked() const;
};

// x = z = beta e with beta = max(1, sqrt(||c||_inf + ||b||_inf + 1)), lambda = 0.
IterateState starting_point(const QuadraticProgram& qp);

// Affine predictor from rhs -F_reg(it) (references at it, so equal to -F),
// Mehrotra sigma = clip((mu_aff/mu)^3, [1e-4, 1-1e-4]), corrector rhs
// [0; 0; sigma mu e - dXaff dZaff e] (or [0; 0; sigma mu e] when
// opts.mehrotra is off). Exactly two op.apply calls. sigma_override, when
// set, replaces the Mehrotra value (gentle reduction strategy).
Direction predictor_corrector(const QnOperator& op, const QuadraticProgram& qp,
                              const IterateState& it, const Regularization& reg,
                              const SolverOptions& opts,
                              std::optional<double> sigma_override = {});

// Ratio tests: alpha_P = min(1, tau min_{dx_i<0} -x_i/dx_i), alpha_D the
// same over (z, dz). lambda moves with alpha_D.
std::pair<double, double> step_sizes(const IterateState& it, const Direction& d,
                                     double tau);

// Up to opts.max_correctors rounds: enlarged trial steps min(1, alpha+0.1),
// trial products clipped into [0.1 mu_t, 10 mu_t] as targets, one backsolve
// per round, kept only while alpha_P + alpha_D gains >= 0.1. A rejected
// round still spent its backsolve: corrector_probes counts computed rounds,
// correctors the kept prefix.
Direction centrality_correctors(const QnOperator& op, const QuadraticProgram& qp,
                                const IterateState& it, Direction d,
                                const SolverOptions& opts);

enum class QnDecision { Store, Reset };

// Store iff the chain has room AND (the step was a Newton step OR the
// configured store rule holds: alpha_P+alpha_D >= eps_alpha when eps_alpha
// is set, else the centrality rule x+'z+ <= eps_c x'z).
QnDecision qn_decide(bool newton_step, double xz_before, double xz_after,
                     double alpha_p, double alpha_d, int ell, int ell_max,
                     const SolverOptions& opts);

// |dx_i|/x_i and |dz_i|/z_i (diagnostic, feeds the trace).
std::pair<Vec, Vec> blocking_report(const IterateState& it, const Direction& d);

SolverReport solve(const QuadraticProgram& qp, const SolverOptions& opts);

}  // namespace qnipm
