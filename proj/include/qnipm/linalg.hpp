#pragma once

#include "qnipm/kernel.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>

namespace qnipm {

struct FactorizationBreakdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FactorStats {
  int dim = 0;          // n + m
  int factor_nnz = 0;
  double seconds = 0.0;
};

// LDL' of the regularized augmented matrix
//   K = [-(Q + Rp + X^-1 Z)  A'; A  Rd]
// frozen together with the (x, z, Rp, Rd) snapshot that defines the full
// Jacobian J at factorization time. Immutable once built; solves are const
// and thread-safe.
class KktFactorization {
 public:
  // Dense backend: hand-written LDL' with symmetric max-|diagonal| pivoting
  // (valid with 1x1 pivots because K is quasi-definite for Rd > 0).
  // Sparse backend: SimplicialLDLT in natural (x-block-first) order behind
  // the same interface. Throws FactorizationBreakdown on a zero pivot, or
  // on a sign-inconsistent pivot when Rd = 0 disables quasi-definiteness.
  static std::shared_ptr<const KktFactorization> compute(
      const QuadraticProgram& qp, const IterateState& it,
      const Regularization& reg, bool sparse_backend = false);

  // rhs blocks (r1, r2, r3) of length n, m, n. Eliminates dz:
  // augmented solve on [r1 - X^-1 r3; r2], then dz = X^-1 (r3 - Z dx),
  // all with the snapshot diagonals. One step of iterative refinement
  // against the snapshot Jacobian follows every backsolve.
  Vec solve_newton(const Vec& rhs) const;

  // (negative, positive, zero) counts of D, zero threshold 1e-14 max|D|.
  std::array<int, 3> inertia() const;

  int n() const { return n_; }
  int m() const { return m_; }
  const Vec& snapshot_x() const { return snap_x_; }
  const Vec& snapshot_z() const { return snap_z_; }
  const Regularization& snapshot_reg() const { return snap_reg_; }
  const FactorStats& stats() const { return stats_; }
  std::uint64_t solve_count() const { return solves_.load(); }

  KktFactorization(const KktFactorization&) = delete;
  KktFactorization& operator=(const KktFactorization&) = delete;
  ~KktFactorization();

 private:
  KktFactorization() = default;

  Vec solve_augmented(const Vec& rhs_nm) const;
  Vec apply_J_snapshot(const Vec& v) const;

  int n_ = 0, m_ = 0;
  const QuadraticProgram* qp_ = nullptr;  // must outlive the factorization
  Vec snap_x_, snap_z_;
  Regularization snap_reg_;
  FactorStats stats_;
  mutable std::atomic<std::uint64_t> solves_{0};

  struct Backend;
  std::unique_ptr<Backend> impl_;
};

// Process-wide count of completed factorizations; never incremented by
// solve_newton (the cost model counts factorizations, not backsolves).
std::uint64_t factorization_count();
void reset_factorization_count();

// Test hook: observes (n, m, inertia) of every completed factorization.
using FactorizationObserver =
    std::function<void(int n, int m, const std::array<int, 3>& inertia)>;
void set_factorization_observer(FactorizationObserver obs);

}  // namespace qnipm
