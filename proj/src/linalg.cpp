#include "qnipm/linalg.hpp"

#include <Eigen/SparseCholesky>

#include <chrono>
#include <cmath>
#include <mutex>

namespace qnipm {

namespace {

std::atomic<std::uint64_t> g_factorizations{0};
std::mutex g_observer_mutex;
FactorizationObserver g_observer;

void notify_observer(int n, int m, const std::array<int, 3>& inertia) {
  FactorizationObserver obs;
  {
    std::lock_guard<std::mutex> lock(g_observer_mutex);
    obs = g_observer;
  }
  if (obs) obs(n, m, inertia);
}

}  // namespace

std::uint64_t factorization_count() { return g_factorizations.load(); }
void reset_factorization_count() { g_factorizations.store(0); }

void set_factorization_observer(FactorizationObserver obs) {
  std::lock_guard<std::mutex> lock(g_observer_mutex);
  g_observer = std::move(obs);
}

// Dense: LDL' with symmetric max-|diagonal| pivoting. 1x1 pivots suffice
// because K is quasi-definite whenever Rd > 0 (any symmetric permutation
// admits the factorization). Sparse: SimplicialLDLT in natural order, no
// numerical pivoting. The x block must be eliminated before the lambda
// block: a lambda row pivoted early contributes a bare Rd ~ 1e-8 pivot
// whose elimination inflates |D| by ~1/Rd and drowns the inertia zero
// threshold. Natural order is exactly x-first, and the (1,1) block is
// negative definite, so every leading minor is safely nonsingular.
struct KktFactorization::Backend {
  bool sparse = false;

  // dense
  Mat L;
  Vec d;
  std::vector<int> perm;  // position -> original index

  // sparse
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>> ldlt;

  Vec solve(const Vec& r) const {
    if (sparse) return ldlt.solve(r);
    const int dim = static_cast<int>(d.size());
    Vec rp(dim);
    for (int k = 0; k < dim; ++k) rp[k] = r[perm[k]];
    // L w = rp, then D, then L' v = w
    for (int k = 0; k < dim; ++k)
      rp.tail(dim - k - 1) -= rp[k] * L.col(k).tail(dim - k - 1);
    rp.array() /= d.array();
    for (int k = dim - 1; k >= 0; --k)
      rp[k] -= L.col(k).tail(dim - k - 1).dot(rp.tail(dim - k - 1));
    Vec out(dim);
    for (int k = 0; k < dim; ++k) out[perm[k]] = rp[k];
    return out;
  }

  Vec diagonal_d() const {
    if (sparse) return ldlt.vectorD();
    return d;
  }
};

KktFactorization::~KktFactorization() = default;

std::shared_ptr<const KktFactorization> KktFactorization::compute(
    const QuadraticProgram& qp, const IterateState& it,
    const Regularization& reg, bool sparse_backend) {
  if (it.x.size() != qp.n || it.z.size() != qp.n || reg.Rp.size() != qp.n ||
      reg.Rd.size() != qp.m)
    throw std::invalid_argument("factorize: dimension mismatch");
  if (qp.n > 0 && (it.x.minCoeff() <= 0.0 || it.z.minCoeff() <= 0.0))
    throw std::invalid_argument("factorize: iterate not interior");

  auto t0 = std::chrono::steady_clock::now();
  const int n = qp.n, m = qp.m, dim = n + m;
  auto fact = std::shared_ptr<KktFactorization>(new KktFactorization);
  fact->n_ = n;
  fact->m_ = m;
  fact->qp_ = &qp;
  fact->snap_x_ = it.x;
  fact->snap_z_ = it.z;
  fact->snap_reg_ = reg;
  fact->impl_ = std::make_unique<Backend>();
  Backend& be = *fact->impl_;
  be.sparse = sparse_backend;

  Vec diag_block = reg.Rp + it.z.cwiseQuotient(it.x);  // X^-1 Z + Rp
  // With every Rd entry positive the matrix is strictly quasi-definite and a
  // zero pivot cannot occur in exact arithmetic; near-zero tests then only
  // need to flag genuine cancellation, never small-but-healthy pivots of a
  // wildly scaled matrix (X^-1 Z spans many orders near the boundary).
  const bool quasi_definite =
      m == 0 || (reg.Rd.size() && reg.Rd.minCoeff() > 0.0);

  if (!sparse_backend) {
    Mat K = Mat::Zero(dim, dim);
    K.topLeftCorner(n, n) = -Mat(qp.Q);
    K.topLeftCorner(n, n).diagonal() -= diag_block;
    if (m) {
      Mat Ad = Mat(qp.A);
      K.bottomLeftCorner(m, n) = Ad;
      K.topRightCorner(n, m) = Ad.transpose();
      K.bottomRightCorner(m, m).diagonal() = reg.Rd;
    }
    // Cancellation reference per column: |initial diagonal| plus all Schur
    // magnitudes subtracted from it. A pivot is numerically zero relative to
    // what was summed into it, not to the global matrix scale.
    Vec colscale = K.diagonal().cwiseAbs();

    be.L = Mat::Identity(dim, dim);
    be.d = Vec::Zero(dim);
    be.perm.resize(dim);
    for (int k = 0; k < dim; ++k) be.perm[k] = k;

    for (int k = 0; k < dim; ++k) {
      int piv = k;
      double best = std::abs(K(k, k));
      for (int j = k + 1; j < dim; ++j)
        if (std::abs(K(j, j)) > best) { best = std::abs(K(j, j)); piv = j; }
      if (piv != k) {
        K.row(k).swap(K.row(piv));
        K.col(k).swap(K.col(piv));
        std::swap(be.perm[k], be.perm[piv]);
        std::swap(colscale[k], colscale[piv]);
        if (k > 0) be.L.row(k).head(k).swap(be.L.row(piv).head(k));
      }
      double dk = K(k, k);
      if (!std::isfinite(dk) || std::abs(dk) <= 1e-13 * colscale[k])
        throw FactorizationBreakdown("zero pivot at elimination step " +
                                     std::to_string(k));
      be.d[k] = dk;
      int r = dim - k - 1;
      if (r > 0) {
        Vec l = K.col(k).tail(r) / dk;
        be.L.col(k).tail(r) = l;
        K.bottomRightCorner(r, r).noalias() -= dk * l * l.transpose();
        colscale.tail(r) += std::abs(dk) * l.cwiseAbs2();
      }
    }
    fact->stats_.factor_nnz = dim * (dim + 1) / 2;
  } else {
    std::vector<Triplet> trips;
    trips.reserve(qp.Q.nonZeros() + qp.A.nonZeros() + dim);
    for (int jo = 0; jo < qp.Q.outerSize(); ++jo)
      for (SpMat::InnerIterator itq(qp.Q, jo); itq; ++itq)
        if (itq.row() >= itq.col())  // lower triangle
          trips.emplace_back(itq.row(), itq.col(), -itq.value());
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, -diag_block[i]);
    for (int jo = 0; jo < qp.A.outerSize(); ++jo)
      for (SpMat::InnerIterator ita(qp.A, jo); ita; ++ita)
        trips.emplace_back(n + ita.row(), ita.col(), ita.value());
    for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, reg.Rd[i]);
    SpMat K(dim, dim);
    K.setFromTriplets(trips.begin(), trips.end());
    be.ldlt.compute(K);
    if (be.ldlt.info() != Eigen::Success)
      throw FactorizationBreakdown("sparse LDLT reported a numerical problem");
    Vec dv = be.ldlt.vectorD();
    double dmax = dv.cwiseAbs().maxCoeff();
    for (int k = 0; k < dim; ++k) {
      bool dead = quasi_definite
                      ? (!std::isfinite(dv[k]) || dv[k] == 0.0)
                      : (!std::isfinite(dv[k]) ||
                         std::abs(dv[k]) <= 1e-14 * std::max(1.0, dmax));
      if (dead) throw FactorizationBreakdown("zero pivot in sparse LDLT");
    }
    fact->stats_.factor_nnz =
        static_cast<int>(be.ldlt.matrixL().nestedExpression().nonZeros());
  }

  fact->stats_.dim = dim;
  auto inert = fact->inertia();
  if (quasi_definite && (inert[0] != n || inert[1] != m || inert[2] != 0))
    throw FactorizationBreakdown(
        "inertia (" + std::to_string(inert[0]) + "," + std::to_string(inert[1]) +
        "," + std::to_string(inert[2]) + ") does not match the quasi-definite pattern");

  fact->stats_.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  g_factorizations.fetch_add(1);
  notify_observer(n, m, inert);
  return fact;
}

std::array<int, 3> KktFactorization::inertia() const {
  Vec dv = impl_->diagonal_d();
  double threshold = 1e-14 * std::max(1.0, dv.cwiseAbs().maxCoeff());
  std::array<int, 3> counts{0, 0, 0};
  for (int k = 0; k < dv.size(); ++k) {
    if (std::abs(dv[k]) <= threshold)
      ++counts[2];
    else if (dv[k] < 0.0)
      ++counts[0];
    else
      ++counts[1];
  }
  return counts;
}

Vec KktFactorization::solve_augmented(const Vec& rhs_nm) const {
  return impl_->solve(rhs_nm);
}

Vec KktFactorization::apply_J_snapshot(const Vec& v) const {
  IterateState snap;
  snap.x = snap_x_;
  snap.z = snap_z_;
  snap.lambda = Vec::Zero(m_);
  return apply_J(*qp_, snap, snap_reg_, v);
}

Vec KktFactorization::solve_newton(const Vec& rhs) const {
  if (rhs.size() != 2 * n_ + m_)
    throw std::invalid_argument("solve_newton: rhs length mismatch");
  auto backsolve = [&](const Vec& r) {
    Vec aug(n_ + m_);
    aug.head(n_) = r.head(n_) - r.tail(n_).cwiseQuotient(snap_x_);
    aug.tail(m_) = r.segment(n_, m_);
    Vec sol = solve_augmented(aug);
    Vec full(2 * n_ + m_);
    full.head(n_ + m_) = sol;
    full.tail(n_) =
        (r.tail(n_) - snap_z_.cwiseProduct(sol.head(n_))).cwiseQuotient(snap_x_);
    return full;
  };
  Vec delta = backsolve(rhs);
  // one fixed-precision refinement step against the snapshot Jacobian
  Vec residual = rhs - apply_J_snapshot(delta);
  delta += backsolve(residual);
  solves_.fetch_add(1);
  return delta;
}

}  // namespace qnipm
