#include "qnipm/ipm.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace qnipm {

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Newton: return "newton";
    case Mode::NewtonMc: return "newton-mc";
    case Mode::Qn: return "qn";
    case Mode::QnMc: return "qn-mc";
  }
  return "?";
}

std::optional<Mode> mode_from_string(const std::string& s) {
  if (s == "newton") return Mode::Newton;
  if (s == "newton-mc") return Mode::NewtonMc;
  if (s == "qn") return Mode::Qn;
  if (s == "qn-mc") return Mode::QnMc;
  return {};
}

std::optional<UpdateKind> update_kind_from_string(const std::string& s) {
  if (s == "u1" || s == "U1") return UpdateKind::U1;
  if (s == "u2" || s == "U2") return UpdateKind::U2;
  if (s == "u3" || s == "U3") return UpdateKind::U3;
  return {};
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::LackOfImprovement: return "lack_of_improvement";
    case SolveStatus::IterationLimit: return "iteration_limit";
    case SolveStatus::InfeasibleSuspected: return "infeasible_suspected";
  }
  return "?";
}

Vec Direction::stacked() const {
  Vec out(dx.size() + dlambda.size() + dz.size());
  out << dx, dlambda, dz;
  return out;
}

IterateState starting_point(const QuadraticProgram& qp) {
  double cn = qp.c.size() ? qp.c.cwiseAbs().maxCoeff() : 0.0;
  double bn = qp.b.size() ? qp.b.cwiseAbs().maxCoeff() : 0.0;
  double beta = std::max(1.0, std::sqrt(cn + bn + 1.0));
  return IterateState::make(Vec::Constant(qp.n, beta), Vec::Zero(qp.m),
                            Vec::Constant(qp.n, beta), 0);
}

namespace {

Direction split_direction(const Vec& d, int n, int m) {
  Direction out;
  out.dx = d.head(n);
  out.dlambda = d.segment(n, m);
  out.dz = d.tail(n);
  return out;
}

double ratio_test(const Vec& v, const Vec& dv, double tau) {
  double alpha = 1.0;
  for (int i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -tau * v[i] / dv[i]);
  return alpha;
}

}  // namespace

std::pair<double, double> step_sizes(const IterateState& it, const Direction& d,
                                     double tau) {
  return {ratio_test(it.x, d.dx, tau), ratio_test(it.z, d.dz, tau)};
}

Direction predictor_corrector(const QnOperator& op, const QuadraticProgram& qp,
                              const IterateState& it, const Regularization& reg,
                              const SolverOptions& opts,
                              std::optional<double> sigma_override) {
  const int n = qp.n, m = qp.m;
  Vec rhs_aff = -eval_F_reg(qp, it, reg);
  Direction aff = split_direction(op.apply(rhs_aff), n, m);

  auto [ap, ad] = step_sizes(it, aff, 1.0);
  Vec x_trial = it.x + ap * aff.dx;
  Vec z_trial = it.z + ad * aff.dz;
  double mu_aff = x_trial.dot(z_trial) / n;
  double sigma = std::pow(mu_aff / std::max(it.mu, 1e-300), 3.0);
  sigma = std::clamp(sigma, 1e-4, 1.0 - 1e-4);
  if (sigma_override) sigma = *sigma_override;

  Vec rhs_corr = Vec::Zero(2 * n + m);
  rhs_corr.tail(n).setConstant(sigma * it.mu);
  if (opts.mehrotra) rhs_corr.tail(n) -= aff.dx.cwiseProduct(aff.dz);
  Direction corr = split_direction(op.apply(rhs_corr), n, m);

  Direction out;
  out.dx = aff.dx + corr.dx;
  out.dlambda = aff.dlambda + corr.dlambda;
  out.dz = aff.dz + corr.dz;
  out.sigma = sigma;
  return out;
}

Direction centrality_correctors(const QnOperator& op, const QuadraticProgram& qp,
                                const IterateState& it, Direction d,
                                const SolverOptions& opts) {
  const int n = qp.n, m = qp.m;
  for (int round = 0; round < opts.max_correctors; ++round) {
    auto [ap, ad] = step_sizes(it, d, opts.tau);
    double ap_bar = std::min(1.0, ap + 0.1);
    double ad_bar = std::min(1.0, ad + 0.1);
    Vec x_t = it.x + ap_bar * d.dx;
    Vec z_t = it.z + ad_bar * d.dz;
    Vec products = x_t.cwiseProduct(z_t);
    double mu_t = products.sum() / n;
    if (mu_t <= 0.0) break;
    Vec target = products.cwiseMax(0.1 * mu_t).cwiseMin(10.0 * mu_t);
    Vec rhs = Vec::Zero(2 * n + m);
    rhs.tail(n) = target - products;
    Direction corr = split_direction(op.apply(rhs), n, m);
    ++d.corrector_probes;  // the backsolve is spent whether or not we keep it
    Direction trial;
    trial.dx = d.dx + corr.dx;
    trial.dlambda = d.dlambda + corr.dlambda;
    trial.dz = d.dz + corr.dz;
    trial.sigma = d.sigma;
    trial.correctors = d.correctors + 1;
    trial.corrector_probes = d.corrector_probes;
    auto [ap2, ad2] = step_sizes(it, trial, opts.tau);
    if (ap2 + ad2 < ap + ad + 0.1) break;  // corrector not worth keeping
    d = trial;
  }
  return d;
}

QnDecision qn_decide(bool newton_step, double xz_before, double xz_after,
                     double alpha_p, double alpha_d, int ell, int ell_max,
                     const SolverOptions& opts) {
  if (ell >= ell_max) return QnDecision::Reset;
  if (newton_step) return QnDecision::Store;
  if (opts.eps_alpha)  // step-size rule replaces the centrality rule; never combined
    return alpha_p + alpha_d >= *opts.eps_alpha ? QnDecision::Store : QnDecision::Reset;
  return xz_after <= opts.eps_c * xz_before ? QnDecision::Store : QnDecision::Reset;
}

std::pair<Vec, Vec> blocking_report(const IterateState& it, const Direction& d) {
  return {d.dx.cwiseAbs().cwiseQuotient(it.x), d.dz.cwiseAbs().cwiseQuotient(it.z)};
}

SolverReport solve(const QuadraticProgram& qp, const SolverOptions& opts) {
  qp.validate();
  SolverReport rep;
  const int n = qp.n, m = qp.m;
  const double tol_d = opts.resolved_tol_d(qp);
  const bool qn_mode = opts.mode == Mode::Qn || opts.mode == Mode::QnMc;
  const int ell_max = qn_mode ? opts.ell_max : 0;

  IterateState it = starting_point(qp);
  double max_a = 0.0, max_q = 0.0;
  for (int jo = 0; jo < qp.A.outerSize(); ++jo)
    for (SpMat::InnerIterator e(qp.A, jo); e; ++e)
      max_a = std::max(max_a, std::abs(e.value()));
  for (int jo = 0; jo < qp.Q.outerSize(); ++jo)
    for (SpMat::InnerIterator e(qp.Q, jo); e; ++e)
      max_q = std::max(max_q, std::abs(e.value()));
  double reg_scale = std::max({1.0, max_a, max_q});
  double rp = opts.reg_base * reg_scale;
  double rd = opts.reg_base * reg_scale;

  std::optional<QnOperator> op;
  std::uint64_t retired_solves = 0;

  auto finalize = [&](SolveStatus status, const std::string& msg = "") {
    rep.status = status;
    rep.message = msg;
    rep.objective = qp.objective(it.x);
    rep.final_residuals = residuals(qp, it);
    rep.backsolves = retired_solves + (op ? op->base().solve_count() : 0);
    rep.x = it.x;
    rep.lambda = it.lambda;
    rep.z = it.z;
    return rep;
  };

  std::shared_ptr<const KktFactorization> base;
  auto factorize_with_escalation = [&](const IterateState& at,
                                       Regularization& reg) -> bool {
    for (int attempt = 0; attempt <= 3; ++attempt) {
      reg = Regularization::uniform(rp, rd, at);
      try {
        base = KktFactorization::compute(qp, at, reg, opts.sparse_backend);
        return true;
      } catch (const FactorizationBreakdown&) {
        rp *= 100.0;
        rd *= 100.0;
      }
    }
    return false;
  };

  Regularization reg = Regularization::uniform(rp, rd, it);
  bool need_factorize = true;
  // Stall window: an iteration is unproductive when neither mu nor an
  // out-of-tolerance infeasibility dropped by 0.1%. Five unproductive
  // iterations in a row trigger a verdict -- unless they were all
  // quasi-Newton steps, in which case the method's own rescue (reset to a
  // fresh factorization) is forced first.
  struct StallEntry {
    bool productive;
    bool newton;
  };
  std::deque<StallEntry> stall_window;
  double prev_mu = it.mu;
  double prev_pinf = 0.0, prev_dinf = 0.0;
  bool prev_step_newton = true;

  for (int k = 0; k < opts.max_iter; ++k) {
    Residuals res = residuals(qp, it);
    if (res.primal_inf <= opts.tol_p && res.dual_inf <= tol_d &&
        res.opt_gap <= opts.tol_opt)
      return finalize(SolveStatus::Optimal);

    if (k > 0) {
      bool mu_prog = it.mu <= 0.999 * prev_mu;
      bool p_prog = prev_pinf > opts.tol_p && res.primal_inf <= 0.999 * prev_pinf;
      bool d_prog = prev_dinf > tol_d && res.dual_inf <= 0.999 * prev_dinf;
      stall_window.push_back({mu_prog || p_prog || d_prog, prev_step_newton});
      if (stall_window.size() > 5) stall_window.pop_front();
      bool stalled = stall_window.size() == 5 &&
                     std::none_of(stall_window.begin(), stall_window.end(),
                                  [](const StallEntry& e) { return e.productive; });
      if (stalled) {
        bool tried_newton = std::any_of(stall_window.begin(), stall_window.end(),
                                        [](const StallEntry& e) { return e.newton; });
        if (!tried_newton) {
          need_factorize = true;
          stall_window.clear();
        } else {
          if (res.opt_gap <= 1e3 * opts.tol_opt &&
              res.primal_inf <= opts.tol_p && res.dual_inf <= tol_d)
            return finalize(SolveStatus::Optimal, "relaxed duality-gap acceptance");
          if (res.primal_inf > 100.0 * opts.tol_p || res.dual_inf > 100.0 * tol_d)
            return finalize(SolveStatus::InfeasibleSuspected,
                            "no progress while significantly infeasible");
          return finalize(SolveStatus::LackOfImprovement);
        }
      }
    }
    prev_mu = it.mu;
    prev_pinf = res.primal_inf;
    prev_dinf = res.dual_inf;

    bool newton_step = false;
    if (need_factorize || !op) {
      // references follow the iterate; Rp/Rd stay frozen for this base's life
      if (!factorize_with_escalation(it, reg))
        return finalize(SolveStatus::InfeasibleSuspected,
                        "factorization breakdown after regularization escalation");
      if (op) {
        retired_solves += op->base().solve_count();
        op->reset(base);
      } else {
        op.emplace(base, opts.update_kind, ell_max);
      }
      need_factorize = false;
      newton_step = true;
      ++rep.factorizations;
    } else {
      reg.ref_x = it.x;
      reg.ref_lambda = it.lambda;
    }

    std::optional<double> sigma_override;
    if (opts.gentle_sigma && !newton_step) sigma_override = 0.9;
    Direction d = predictor_corrector(*op, qp, it, reg, opts, sigma_override);

    bool correct = (newton_step &&
                    (opts.mode == Mode::NewtonMc || opts.mode == Mode::QnMc)) ||
                   (!newton_step && qn_mode);
    if (correct) d = centrality_correctors(*op, qp, it, d, opts);

    auto [alpha_p, alpha_d] = step_sizes(it, d, opts.tau);
    auto [bx, bz] = blocking_report(it, d);
    double max_blocking = 0.0;
    if (n) max_blocking = std::max(bx.maxCoeff(), bz.maxCoeff());

    IterateState next;
    next.x = it.x + alpha_p * d.dx;
    next.lambda = it.lambda + alpha_d * d.dlambda;
    next.z = it.z + alpha_d * d.dz;
    next.k = k + 1;
    next.refresh_mu();

    double xz_before = it.x.dot(it.z);
    double xz_after = next.x.dot(next.z);
    QnDecision decision =
        qn_mode ? qn_decide(newton_step, xz_before, xz_after, alpha_p, alpha_d,
                            op->ell(), ell_max, opts)
                : QnDecision::Reset;
    bool stored = false;
    if (decision == QnDecision::Store) {
      Vec s(2 * n + m);
      s << next.x - it.x, next.lambda - it.lambda, next.z - it.z;
      Vec y = eval_F_reg(qp, next, reg) - eval_F_reg(qp, it, reg);
      stored = op->record_pair(s, y);
      // A guard-rejected pair leaves the operator unchanged. The chain (if
      // any) is still valid, so keep using it; refactorize only when there
      // is no chain to continue (rejection straight after a Newton step).
      if (!stored && op->ell() == 0) need_factorize = true;
    } else {
      need_factorize = true;
    }

    IterationTraceRow row;
    row.k = k;
    row.step = newton_step ? 'N' : 'Q';
    row.mu = it.mu;
    row.alpha_p = alpha_p;
    row.alpha_d = alpha_d;
    row.sigma = d.sigma;
    row.ell = op->ell() - (stored ? 1 : 0);  // chain length used for this step
    row.stored = stored;
    row.correctors = d.correctors;
    row.corrector_probes = d.corrector_probes;
    row.primal_inf = res.primal_inf;
    row.dual_inf = res.dual_inf;
    row.opt_gap = res.opt_gap;
    row.min_x = next.x.minCoeff();
    row.min_z = next.z.minCoeff();
    row.rp = rp;
    row.max_blocking = max_blocking;
    rep.trace.push_back(row);

    ++rep.iterations;
    if (newton_step)
      ++rep.newton_steps;
    else
      ++rep.qn_steps;

    prev_step_newton = newton_step;
    it = std::move(next);
  }

  return finalize(SolveStatus::IterationLimit);
}

}  // namespace qnipm
