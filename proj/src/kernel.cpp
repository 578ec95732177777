#include "qnipm/kernel.hpp"

#include <stdexcept>

namespace qnipm {

IterateState IterateState::make(Vec x, Vec lambda, Vec z, int k) {
  IterateState it;
  it.x = std::move(x);
  it.lambda = std::move(lambda);
  it.z = std::move(z);
  it.k = k;
  if (it.x.size() != it.z.size())
    throw std::invalid_argument("iterate: x and z sizes differ");
  if (it.x.size() > 0 && (it.x.minCoeff() <= 0.0 || it.z.minCoeff() <= 0.0))
    throw std::invalid_argument("iterate is not strictly interior");
  it.refresh_mu();
  return it;
}

void IterateState::refresh_mu() {
  mu = x.size() ? x.dot(z) / static_cast<double>(x.size()) : 0.0;
}

Regularization Regularization::zero(int n, int m) {
  return {Vec::Zero(n), Vec::Zero(m), Vec::Zero(n), Vec::Zero(m)};
}

Regularization Regularization::uniform(double rp, double rd, const IterateState& it) {
  return {Vec::Constant(it.x.size(), rp), Vec::Constant(it.lambda.size(), rd),
          it.x, it.lambda};
}

namespace {
void check_dims(const QuadraticProgram& qp, const IterateState& it) {
  if (it.x.size() != qp.n || it.lambda.size() != qp.m || it.z.size() != qp.n)
    throw std::invalid_argument("iterate dimensions do not match the problem");
}
}  // namespace

Vec eval_F(const QuadraticProgram& qp, const IterateState& it) {
  check_dims(qp, it);
  Vec f(2 * qp.n + qp.m);
  f.head(qp.n) = -(qp.Q * it.x) + qp.A.transpose() * it.lambda + it.z - qp.c;
  f.segment(qp.n, qp.m) = qp.A * it.x - qp.b;
  f.tail(qp.n) = it.x.cwiseProduct(it.z);
  return f;
}

Vec eval_F_reg(const QuadraticProgram& qp, const IterateState& it,
               const Regularization& reg) {
  Vec f = eval_F(qp, it);
  f.head(qp.n) -= reg.Rp.cwiseProduct(it.x - reg.ref_x);
  f.segment(qp.n, qp.m) += reg.Rd.cwiseProduct(it.lambda - reg.ref_lambda);
  return f;
}

Vec apply_J(const QuadraticProgram& qp, const IterateState& it,
            const Regularization& reg, const Vec& v) {
  check_dims(qp, it);
  if (v.size() != 2 * qp.n + qp.m)
    throw std::invalid_argument("apply_J: vector length mismatch");
  const auto v1 = v.head(qp.n);
  const auto v2 = v.segment(qp.n, qp.m);
  const auto v3 = v.tail(qp.n);
  Vec out(v.size());
  out.head(qp.n) =
      -(qp.Q * v1) - reg.Rp.cwiseProduct(v1) + qp.A.transpose() * v2 + v3;
  out.segment(qp.n, qp.m) = qp.A * v1 + reg.Rd.cwiseProduct(v2);
  out.tail(qp.n) = it.z.cwiseProduct(v1) + it.x.cwiseProduct(v3);
  return out;
}

Residuals residuals(const QuadraticProgram& qp, const IterateState& it) {
  check_dims(qp, it);
  Residuals r;
  r.primal_inf = (qp.b - qp.A * it.x).norm() / (1.0 + qp.b.norm());
  r.dual_inf = (qp.c + qp.Q * it.x - qp.A.transpose() * it.lambda - it.z).norm() /
               (1.0 + qp.c.norm());
  double mu = it.x.dot(it.z) / static_cast<double>(qp.n);
  r.opt_gap = mu / (1.0 + std::abs(qp.objective(it.x)));
  return r;
}

}  // namespace qnipm
