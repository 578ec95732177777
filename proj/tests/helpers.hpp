#pragma once

#include "qnipm/ipm.hpp"
#include "qnipm/rng.hpp"

#include <Eigen/Eigenvalues>

namespace qnipm::testing {

// Small random standard-form instance, independent of the bench generator:
// dense draws, Q = G'G (+ ridge), b from a positive point so the instance
// is primal feasible.
inline QuadraticProgram make_random_qp(std::mt19937_64& rng, int n, int m,
                                       bool with_q = true) {
  QuadraticProgram qp;
  qp.n = n;
  qp.m = m;
  qp.name = "test";
  Mat a = Mat::Zero(m, n);
  for (int i = 0; i < m; ++i) {
    a(i, (i * 7) % n) = uniform(rng, 0.8, 1.6);  // spread pivots, no zero rows
    for (int j = 0; j < n; ++j)
      if (uniform01(rng) < 0.6) a(i, j) += uniform(rng, -1.0, 1.0);
  }
  qp.A = a.sparseView();
  Mat q = Mat::Zero(n, n);
  if (with_q) {
    Mat g = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (uniform01(rng) < 0.35) g(i, j) = uniform(rng, -0.8, 0.8);
    q = g.transpose() * g;
    for (int i = 0; i < n; ++i) q(i, i) += 0.05;
  }
  qp.Q = q.sparseView();
  Vec x0(n);
  for (int j = 0; j < n; ++j) x0[j] = uniform(rng, 0.5, 1.5);
  qp.b = qp.A * x0;
  qp.c = Vec(n);
  for (int j = 0; j < n; ++j) qp.c[j] = uniform(rng, -1.0, 1.0);
  return qp;
}

inline IterateState random_interior(std::mt19937_64& rng, const QuadraticProgram& qp,
                                    double lo = 0.3, double hi = 3.0) {
  Vec x(qp.n), z(qp.n), lambda(qp.m);
  for (int j = 0; j < qp.n; ++j) x[j] = uniform(rng, lo, hi);
  for (int j = 0; j < qp.n; ++j) z[j] = uniform(rng, lo, hi);
  for (int i = 0; i < qp.m; ++i) lambda[i] = uniform(rng, -1.0, 1.0);
  return IterateState::make(std::move(x), std::move(lambda), std::move(z));
}

// Analytic instances with known optima: QP min x'x/2 s.t. x1+x2 = 2
// (optimum (1,1), objective 1) and LP min x1+2x2 s.t. x1+x2 = 1
// (optimum (1,0), objective 1).
inline QuadraticProgram analytic_qp() {
  QuadraticProgram qp;
  qp.name = "analytic-qp";
  qp.n = 2;
  qp.m = 1;
  qp.Q.resize(2, 2);
  qp.Q.insert(0, 0) = 1.0;
  qp.Q.insert(1, 1) = 1.0;
  qp.A.resize(1, 2);
  qp.A.insert(0, 0) = 1.0;
  qp.A.insert(0, 1) = 1.0;
  qp.b = Vec::Constant(1, 2.0);
  qp.c = Vec::Zero(2);
  return qp;
}

inline QuadraticProgram analytic_lp() {
  QuadraticProgram qp;
  qp.name = "analytic-lp";
  qp.n = 2;
  qp.m = 1;
  qp.Q.resize(2, 2);
  qp.A.resize(1, 2);
  qp.A.insert(0, 0) = 1.0;
  qp.A.insert(0, 1) = 1.0;
  qp.b = Vec::Constant(1, 1.0);
  qp.c = (Vec(2) << 1.0, 2.0).finished();
  return qp;
}

// Entry-wise dense assembly of the regularized Jacobian (test oracle,
// independent of kernel::apply_J).
inline Mat dense_J(const QuadraticProgram& qp, const IterateState& it,
                   const Regularization& reg) {
  const int n = qp.n, m = qp.m;
  Mat J = Mat::Zero(2 * n + m, 2 * n + m);
  Mat q = Mat(qp.Q), a = Mat(qp.A);
  J.topLeftCorner(n, n) = -q - Mat(reg.Rp.asDiagonal());
  J.block(0, n, n, m) = a.transpose();
  J.block(0, n + m, n, n) = Mat::Identity(n, n);
  J.block(n, 0, m, n) = a;
  J.block(n, n, m, m) = Mat(reg.Rd.asDiagonal());
  J.block(n + m, 0, n, n) = Mat(it.z.asDiagonal());
  J.block(n + m, n + m, n, n) = Mat(it.x.asDiagonal());
  return J;
}

// Dense augmented matrix for inertia cross-checks.
inline Mat dense_K(const QuadraticProgram& qp, const IterateState& it,
                   const Regularization& reg) {
  const int n = qp.n, m = qp.m;
  Mat K = Mat::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = -Mat(qp.Q);
  K.topLeftCorner(n, n).diagonal() -= reg.Rp + it.z.cwiseQuotient(it.x);
  K.block(n, 0, m, n) = Mat(qp.A);
  K.block(0, n, n, m) = Mat(qp.A).transpose();
  K.block(n, n, m, m).diagonal() = reg.Rd;
  return K;
}

// Eigenvalue sign counts (independent inertia oracle).
inline std::array<int, 3> eig_inertia(const Mat& sym, double tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  std::array<int, 3> counts{0, 0, 0};
  double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double ev = es.eigenvalues()[i];
    if (std::abs(ev) <= tol * scale)
      ++counts[2];
    else if (ev < 0)
      ++counts[0];
    else
      ++counts[1];
  }
  return counts;
}

// The factorization keeps a pointer to the problem, so the setup is filled
// in place rather than returned by value.
struct ChainSetup {
  QuadraticProgram qp;
  IterateState snapshot;
  Regularization reg;
  std::shared_ptr<const KktFactorization> base;
};

inline void init_base(ChainSetup& setup, std::mt19937_64& rng, int n, int m,
                      bool with_q = true, double rp = 1e-8, double rd = 1e-8) {
  setup.qp = make_random_qp(rng, n, m, with_q);
  setup.snapshot = random_interior(rng, setup.qp);
  setup.reg = Regularization::uniform(rp, rd, setup.snapshot);
  setup.base = KktFactorization::compute(setup.qp, setup.snapshot, setup.reg);
}

inline Vec random_vec(std::mt19937_64& rng, int len, double lo = -1.0,
                      double hi = 1.0) {
  Vec v(len);
  for (int i = 0; i < len; ++i) v[i] = uniform(rng, lo, hi);
  return v;
}

// Chain of arbitrary (s, y) pairs (the inverse secant equation and dense
// oracle equivalence hold for any data the guards accept).
inline void fill_arbitrary_chain(QnOperator& op, std::mt19937_64& rng, int count) {
  const int dim = 2 * op.base().n() + op.base().m();
  for (int i = 0; i < count; ++i) {
    for (int tries = 0; tries < 20; ++tries) {
      Vec s = random_vec(rng, dim);
      Vec y = random_vec(rng, dim);
      if (op.record_pair(s, y)) break;
    }
  }
}

// Chain whose pairs are genuine residual differences under the frozen
// regularization: y = F_reg(it + s) - F_reg(it). These satisfy the
// linearity identity in the first two blocks.
inline void fill_fdiff_chain(QnOperator& op, const ChainSetup& setup,
                             std::mt19937_64& rng, int count) {
  const QuadraticProgram& qp = setup.qp;
  IterateState cur = setup.snapshot;
  for (int i = 0; i < count; ++i) {
    for (int tries = 0; tries < 20; ++tries) {
      IterateState next = random_interior(rng, qp);
      next.lambda = cur.lambda + random_vec(rng, qp.m, -0.5, 0.5);
      next.refresh_mu();
      Vec s(2 * qp.n + qp.m);
      s << next.x - cur.x, next.lambda - cur.lambda, next.z - cur.z;
      Vec y = eval_F_reg(qp, next, setup.reg) - eval_F_reg(qp, cur, setup.reg);
      if (op.record_pair(s, y)) {
        cur = next;
        break;
      }
    }
  }
}

}  // namespace qnipm::testing
