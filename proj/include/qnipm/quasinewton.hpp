#pragma once

#include "qnipm/linalg.hpp"

#include <optional>
#include <vector>

namespace qnipm {

// U1: general Broyden "bad" (rank-one update of the inverse, rho = y'y).
// U2: structured Broyden "bad" preserving the Jacobian's zero blocks,
//     rho = y_b'y_b + y_mu'y_mu, applied through the modified-RHS solve.
// U3: Broyden "good", rho = s'H y with u = s - H y stored at record time.
enum class UpdateKind { U1, U2, U3 };

const char* to_string(UpdateKind k);

struct SecantTriple {
  Vec s;  // step, blocks (s_x, s_lambda, s_z)
  Vec y;  // residual difference, blocks (y_c, y_b, y_mu); kept for U3 too
  Vec u;  // U3 only: s - H y at record time
  double rho = 0.0;
};

// Low-rank inverse approximation H of the Jacobian: a frozen base
// factorization plus an ordered chain of secant triples (oldest first).
// apply() performs exactly one base backsolve regardless of chain length.
class QnOperator {
 public:
  QnOperator(std::shared_ptr<const KktFactorization> base, UpdateKind kind,
             int ell_max);

  // Guards: U1/U2 need |rho| >= 1e-12 ||y||^2, U3 |rho| >= 1e-12 ||s|| ||y||,
  // and rho finite and nonzero. A rejected pair leaves the operator
  // unchanged and returns false. Requires ell() < ell_max.
  bool record_pair(const Vec& s, const Vec& y);

  Vec apply(const Vec& v) const;

  // Clears the chain and installs a fresh factorization.
  void reset(std::shared_ptr<const KktFactorization> fresh);

  int ell() const { return static_cast<int>(triples_.size()); }
  int ell_max() const { return ell_max_; }
  UpdateKind kind() const { return kind_; }
  const KktFactorization& base() const { return *base_; }
  std::shared_ptr<const KktFactorization> base_ptr() const { return base_; }
  const std::vector<SecantTriple>& triples() const { return triples_; }

 private:
  std::shared_ptr<const KktFactorization> base_;
  UpdateKind kind_;
  int ell_max_;
  std::vector<SecantTriple> triples_;
};

// Test oracle: materializes H explicitly from the rank-one recursions
// (ignoring stored rho/u) and multiplies. H_0 = inverse of base_dense by
// dense LU; U2 masks the update row to w = [0; y_b; y_mu]. Throws
// std::runtime_error on a singular base. Desk scale only (dim <= 60).
Vec dense_oracle_apply(const Mat& base_dense,
                       const std::vector<SecantTriple>& triples,
                       UpdateKind kind, const Vec& v, int n, int m);

}  // namespace qnipm
