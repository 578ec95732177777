#pragma once

#include "qnipm/problem.hpp"

namespace qnipm {

// Strictly interior primal-dual point. Block order everywhere: (x, lambda, z).
struct IterateState {
  Vec x;       // length n, > 0
  Vec lambda;  // length m
  Vec z;       // length n, > 0
  double mu = 0.0;  // x'z / n
  int k = 0;

  static IterateState make(Vec x, Vec lambda, Vec z, int k = 0);
  void refresh_mu();
};

// Diagonal primal/dual regularization with proximal reference points.
struct Regularization {
  Vec Rp;          // length n, >= 0
  Vec Rd;          // length m, >= 0
  Vec ref_x;       // x-hat
  Vec ref_lambda;  // lambda-hat

  static Regularization zero(int n, int m);
  static Regularization uniform(double rp, double rd, const IterateState& it);
};

// F(x,lambda,z) = [-Qx + A'lambda + z - c; Ax - b; XZe].
Vec eval_F(const QuadraticProgram& qp, const IterateState& it);

// F with proximal terms: first block -Rp(x - x_hat), second +Rd(lambda - lambda_hat).
Vec eval_F_reg(const QuadraticProgram& qp, const IterateState& it,
               const Regularization& reg);

// Matrix-free product with the regularized Jacobian
//   [-(Q+Rp)  A'  I ]
//   [ A       Rd  0 ]
//   [ Z       0   X ]
// where X, Z are diag(it.x), diag(it.z).
Vec apply_J(const QuadraticProgram& qp, const IterateState& it,
            const Regularization& reg, const Vec& v);

struct Residuals {
  double primal_inf = 0.0;  // ||b - Ax|| / (1 + ||b||)
  double dual_inf = 0.0;    // ||c + Qx - A'lambda - z|| / (1 + ||c||)
  double opt_gap = 0.0;     // mu / (1 + |c'x + x'Qx/2|)
};

Residuals residuals(const QuadraticProgram& qp, const IterateState& it);

}  // namespace qnipm
