#include "qnipm/quasinewton.hpp"

#include <Eigen/LU>

#include <cmath>

namespace qnipm {

const char* to_string(UpdateKind k) {
  switch (k) {
    case UpdateKind::U1: return "u1";
    case UpdateKind::U2: return "u2";
    case UpdateKind::U3: return "u3";
  }
  return "?";
}

QnOperator::QnOperator(std::shared_ptr<const KktFactorization> base,
                       UpdateKind kind, int ell_max)
    : base_(std::move(base)), kind_(kind), ell_max_(ell_max) {
  if (!base_) throw std::invalid_argument("QnOperator: null base");
  if (ell_max_ < 0) throw std::invalid_argument("QnOperator: negative ell_max");
}

bool QnOperator::record_pair(const Vec& s, const Vec& y) {
  if (ell() >= ell_max_) throw std::logic_error("record_pair: chain is full");
  const int n = base_->n(), m = base_->m();
  if (s.size() != 2 * n + m || y.size() != s.size())
    throw std::invalid_argument("record_pair: dimension mismatch");

  SecantTriple t;
  t.s = s;
  t.y = y;
  double rho = 0.0, guard = 0.0;
  switch (kind_) {
    case UpdateKind::U1:
      rho = y.squaredNorm();
      guard = 1e-12 * y.squaredNorm();
      break;
    case UpdateKind::U2:
      // structured weight w = [0; y_b; y_mu]
      rho = y.tail(n + m).squaredNorm();
      guard = 1e-12 * y.squaredNorm();
      break;
    case UpdateKind::U3: {
      Vec hy = apply(y);  // one base solve through the current operator
      rho = s.dot(hy);
      guard = 1e-12 * s.norm() * y.norm();
      t.u = s - hy;
      break;
    }
  }
  if (!std::isfinite(rho) || rho == 0.0 || std::abs(rho) < guard) return false;
  t.rho = rho;
  triples_.push_back(std::move(t));
  return true;
}

Vec QnOperator::apply(const Vec& v) const {
  const int n = base_->n(), m = base_->m();
  if (v.size() != 2 * n + m)
    throw std::invalid_argument("apply: vector length mismatch");
  const int ell = static_cast<int>(triples_.size());

  if (kind_ == UpdateKind::U3) {
    // base solve first, then rank-one terms oldest to newest
    Vec r = base_->solve_newton(v);
    for (int i = 0; i < ell; ++i) {
      const SecantTriple& t = triples_[i];
      double alpha = t.s.dot(r) / t.rho;
      r += alpha * t.u;
    }
    return r;
  }

  // U1/U2: alpha recursion newest to oldest on q
  Vec q = v;
  std::vector<double> alpha(ell, 0.0);
  for (int j = ell - 1; j >= 0; --j) {
    const SecantTriple& t = triples_[j];
    double num = kind_ == UpdateKind::U1 ? t.y.dot(q) : t.y.tail(n + m).dot(q.tail(n + m));
    alpha[j] = num / t.rho;
    q -= alpha[j] * t.y;
  }

  if (kind_ == UpdateKind::U1) {
    Vec r = base_->solve_newton(q);
    for (int i = 0; i < ell; ++i) r += alpha[i] * triples_[i].s;
    return r;
  }

  // U2: single solve with the modified right-hand side
  //   J_base r = v + [0; 0; sum_i alpha_i (Z s_x + X s_z - y_mu)]
  // which equals H v because the first two blocks of y - J_base s vanish.
  Vec rhs = v;
  const Vec& sx = base_->snapshot_x();
  const Vec& sz = base_->snapshot_z();
  for (int i = 0; i < ell; ++i) {
    const SecantTriple& t = triples_[i];
    rhs.tail(n) += alpha[i] * (sz.cwiseProduct(t.s.head(n)) +
                               sx.cwiseProduct(t.s.tail(n)) -
                               t.y.tail(n));
  }
  return base_->solve_newton(rhs);
}

void QnOperator::reset(std::shared_ptr<const KktFactorization> fresh) {
  if (!fresh) throw std::invalid_argument("reset: null base");
  base_ = std::move(fresh);
  triples_.clear();
}

Vec dense_oracle_apply(const Mat& base_dense,
                       const std::vector<SecantTriple>& triples,
                       UpdateKind kind, const Vec& v, int n, int m) {
  const int dim = 2 * n + m;
  if (base_dense.rows() != dim || base_dense.cols() != dim || v.size() != dim)
    throw std::invalid_argument("dense_oracle_apply: dimension mismatch");
  Eigen::FullPivLU<Mat> lu(base_dense);
  if (!lu.isInvertible())
    throw std::runtime_error("dense_oracle_apply: singular base matrix");
  Mat H = lu.inverse();
  for (const SecantTriple& t : triples) {
    switch (kind) {
      case UpdateKind::U1: {
        double rho = t.y.squaredNorm();
        H += (t.s - H * t.y) * (t.y.transpose() / rho);
        break;
      }
      case UpdateKind::U2: {
        Vec w = Vec::Zero(dim);
        w.tail(n + m) = t.y.tail(n + m);
        double rho = w.dot(t.y);
        H += (t.s - H * t.y) * (w.transpose() / rho);
        break;
      }
      case UpdateKind::U3: {
        Vec hy = H * t.y;
        double rho = t.s.dot(hy);
        H += (t.s - hy) * (t.s.transpose() * H) / rho;
        break;
      }
    }
  }
  return H * v;
}

}  // namespace qnipm
