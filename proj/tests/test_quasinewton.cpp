#include "helpers.hpp"

#include <doctest.h>

using namespace qnipm;
using namespace qnipm::testing;

namespace {

// n = 1, m = 0, Q = 0, x = z = 1, no regularization:
// J0 = [0 1; 1 1], inverse [-1 1; 1 0].
struct TinyBase {
  QuadraticProgram qp;
  IterateState it;
  Regularization reg;
  std::shared_ptr<const KktFactorization> base;

  TinyBase() {
    qp.n = 1;
    qp.m = 0;
    qp.Q.resize(1, 1);
    qp.A.resize(0, 1);
    qp.b = Vec(0);
    qp.c = Vec::Zero(1);
    it = IterateState::make(Vec::Ones(1), Vec(0), Vec::Ones(1));
    reg = Regularization::zero(1, 0);
    base = KktFactorization::compute(qp, it, reg);
  }

  static Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
  }
};

}  // namespace

TEST_SUITE("quasinewton") {

TEST_CASE("hand-checked rank-one updates on a 2x2 base") {
  SUBCASE("good-Broyden triple and apply") {
    TinyBase t;
    QnOperator op(t.base, UpdateKind::U3, 3);
    CHECK(op.apply(TinyBase::v2(0, 1)).isApprox(TinyBase::v2(1, 0), 1e-12));
    REQUIRE(op.record_pair(TinyBase::v2(2, 0), TinyBase::v2(0, 1)));
    REQUIRE(op.ell() == 1);
    // rho = s'H0 y = (2,0).(1,0) = 2, u = s - H0 y = (1,0)
    CHECK(op.triples()[0].rho == doctest::Approx(2.0));
    CHECK(op.triples()[0].u.isApprox(TinyBase::v2(1, 0), 1e-12));
    // H1 = [-2 2; 1 0]: H1 (0,2) = (4, 0)
    CHECK(op.apply(TinyBase::v2(0, 2)).isApprox(TinyBase::v2(4, 0), 1e-12));
  }
  SUBCASE("bad-Broyden apply via the two-loop recursion") {
    TinyBase t;
    QnOperator op(t.base, UpdateKind::U1, 3);
    REQUIRE(op.record_pair(TinyBase::v2(1, 1), TinyBase::v2(1, 0)));
    CHECK(op.triples()[0].rho == doctest::Approx(1.0));  // y'y
    // H1 = [1 1; 1 0]: H1 (3,1) = (4, 3)
    CHECK(op.apply(TinyBase::v2(3, 1)).isApprox(TinyBase::v2(4, 3), 1e-12));
  }
  SUBCASE("structured update through the modified right-hand side") {
    TinyBase t;
    QnOperator op(t.base, UpdateKind::U2, 3);
    // Residual-consistent pair for the step (x,z): (1,1) -> (2,1.5):
    // s = (1, 0.5), y = (s_z, x+z+ - xz) = (0.5, 2).
    REQUIRE(op.record_pair(TinyBase::v2(1, 0.5), TinyBase::v2(0.5, 2)));
    CHECK(op.triples()[0].rho == doctest::Approx(4.0));  // masked: y_mu^2
    // H1 = [-1 0.75; 1 0]: H1 (0,2) = (1.5, 0)
    CHECK(op.apply(TinyBase::v2(0, 2)).isApprox(TinyBase::v2(1.5, 0), 1e-12));
  }
}

TEST_CASE("newest secant pair is interpolated exactly") {
  std::mt19937_64 rng(301);
  for (UpdateKind kind : {UpdateKind::U1, UpdateKind::U2, UpdateKind::U3}) {
    CAPTURE(to_string(kind));
    ChainSetup setup;
    init_base(setup, rng, 6, 3);
    QnOperator op(setup.base, kind, 5);
    // U2's modified-RHS application is exact only for residual-consistent
    // pairs; the other two interpolate arbitrary data.
    if (kind == UpdateKind::U2)
      fill_fdiff_chain(op, setup, rng, 4);
    else
      fill_arbitrary_chain(op, rng, 4);
    REQUIRE(op.ell() == 4);
    const SecantTriple& newest = op.triples().back();
    CHECK(op.apply(newest.y).isApprox(newest.s, 1e-7));
  }
}

TEST_CASE("chains reproduce the explicit dense recursions") {
  std::mt19937_64 rng(302);
  for (UpdateKind kind : {UpdateKind::U1, UpdateKind::U2, UpdateKind::U3}) {
    CAPTURE(to_string(kind));
    ChainSetup setup;
    init_base(setup, rng, 7, 3);
    Mat J0 = dense_J(setup.qp, setup.snapshot, setup.reg);
    QnOperator op(setup.base, kind, 5);
    if (kind == UpdateKind::U2)
      fill_fdiff_chain(op, setup, rng, 5);
    else
      fill_arbitrary_chain(op, rng, 5);
    REQUIRE(op.ell() == 5);
    for (int rep = 0; rep < 5; ++rep) {
      Vec v = random_vec(rng, 17);
      Vec got = op.apply(v);
      Vec want = dense_oracle_apply(J0, op.triples(), kind, v, 7, 3);
      CHECK(got.isApprox(want, 1e-8));
    }
  }
}

TEST_CASE("structured updates preserve the Jacobian's linear rows") {
  std::mt19937_64 rng(303);
  ChainSetup setup;
  init_base(setup, rng, 6, 3);
  Mat J0 = dense_J(setup.qp, setup.snapshot, setup.reg);
  QnOperator op(setup.base, UpdateKind::U2, 5);
  fill_fdiff_chain(op, setup, rng, 5);
  REQUIRE(op.ell() == 5);

  // For residual-consistent pairs the structured inverse keeps the first
  // n + m rows of the direct operator equal to J0's: the first two blocks
  // of J0 H v must reproduce v's.
  for (int rep = 0; rep < 5; ++rep) {
    Vec v = random_vec(rng, 15);
    Vec r = dense_oracle_apply(J0, op.triples(), UpdateKind::U2, v, 6, 3);
    Vec back = J0 * r;
    CHECK((back.head(9) - v.head(9)).norm() <= 1e-9 * (1.0 + v.norm()));
  }

  // What the mask alone buys: the lambda columns of the complementarity
  // rows (the Jacobian's zero (3,2) block) stay empty up to Rd-scale noise,
  // while the unmasked update fills them in through A'y_c. Densify both
  // direct operators from the same pairs (Sherman-Morrison on the
  // inverse-form update).
  auto densify = [&](UpdateKind kind) {
    Mat B = J0;
    for (const SecantTriple& t : op.triples()) {
      Vec w = t.y;
      if (kind == UpdateKind::U2) w.head(6).setZero();
      Vec Ba = B * t.s - t.y;
      B -= (Ba * (w.transpose() * B)) / (w.dot(t.y) + w.dot(Ba));
    }
    return B;
  };
  double masked = densify(UpdateKind::U2).block(9, 6, 6, 3).cwiseAbs().maxCoeff();
  double unmasked = densify(UpdateKind::U1).block(9, 6, 6, 3).cwiseAbs().maxCoeff();
  CHECK(masked <= 1e-6);
  CHECK(unmasked > 1e-3);  // the property is not vacuous
}

TEST_CASE("one base backsolve per application, any chain length") {
  std::mt19937_64 rng(304);
  for (UpdateKind kind : {UpdateKind::U1, UpdateKind::U2, UpdateKind::U3}) {
    CAPTURE(to_string(kind));
    ChainSetup setup;
    init_base(setup, rng, 6, 2);
    QnOperator op(setup.base, kind, 6);
    if (kind == UpdateKind::U2)
      fill_fdiff_chain(op, setup, rng, 6);
    else
      fill_arbitrary_chain(op, rng, 6);
    REQUIRE(op.ell() == 6);
    Vec v = random_vec(rng, 14);
    std::uint64_t before = op.base().solve_count();
    (void)op.apply(v);
    CHECK(op.base().solve_count() == before + 1);
  }
}

TEST_CASE("recording a perfectly predicted pair changes nothing") {
  std::mt19937_64 rng(305);
  for (UpdateKind kind : {UpdateKind::U1, UpdateKind::U2, UpdateKind::U3}) {
    CAPTURE(to_string(kind));
    ChainSetup setup;
    init_base(setup, rng, 5, 2);
    QnOperator op(setup.base, kind, 3);
    Vec y = random_vec(rng, 12);
    Vec s = op.apply(y);  // s = H y: the secant equation already holds
    Vec probe = random_vec(rng, 12);
    Vec before = op.apply(probe);
    bool stored = op.record_pair(s, y);
    if (stored) CHECK(op.apply(probe).isApprox(before, 1e-9));
  }
}

TEST_CASE("degenerate pairs are rejected and leave the operator intact") {
  std::mt19937_64 rng(306);
  ChainSetup setup;
  init_base(setup, rng, 5, 2);

  SUBCASE("zero residual difference") {
    for (UpdateKind kind : {UpdateKind::U1, UpdateKind::U2, UpdateKind::U3}) {
      QnOperator op(setup.base, kind, 3);
      Vec probe = random_vec(rng, 12);
      Vec before = op.apply(probe);
      CHECK_FALSE(op.record_pair(random_vec(rng, 12), Vec::Zero(12)));
      CHECK(op.ell() == 0);
      CHECK(op.apply(probe) == before);
    }
  }
  SUBCASE("good-Broyden curvature orthogonal to the step") {
    QnOperator op(setup.base, UpdateKind::U3, 3);
    Vec y = random_vec(rng, 12);
    Vec hy = op.apply(y);
    Vec s = random_vec(rng, 12);
    s -= (s.dot(hy) / hy.squaredNorm()) * hy;  // s'Hy = 0
    CHECK_FALSE(op.record_pair(s, y));
    CHECK(op.ell() == 0);
  }
}

TEST_CASE("update kinds are genuinely different operators") {
  std::mt19937_64 rng(307);
  ChainSetup setup;
  init_base(setup, rng, 6, 3);
  QnOperator op1(setup.base, UpdateKind::U1, 4);
  QnOperator op2(setup.base, UpdateKind::U2, 4);
  // Same residual-consistent pairs into both.
  fill_fdiff_chain(op1, setup, rng, 4);
  for (const SecantTriple& t : op1.triples()) REQUIRE(op2.record_pair(t.s, t.y));
  Vec v = random_vec(rng, 15);
  CHECK_FALSE(op1.apply(v).isApprox(op2.apply(v), 1e-6));
}

TEST_CASE("reset installs a fresh base and clears the chain") {
  std::mt19937_64 rng(308);
  ChainSetup first;
  init_base(first, rng, 5, 2);
  QnOperator op(first.base, UpdateKind::U2, 4);
  fill_fdiff_chain(op, first, rng, 3);
  REQUIRE(op.ell() == 3);

  IterateState moved = random_interior(rng, first.qp);
  Regularization reg2 = Regularization::uniform(1e-8, 1e-8, moved);
  auto fresh = KktFactorization::compute(first.qp, moved, reg2);
  op.reset(fresh);
  CHECK(op.ell() == 0);
  CHECK(op.base_ptr().get() == fresh.get());
  Vec v = random_vec(rng, 12);
  CHECK(op.apply(v) == fresh->solve_newton(v));
}

TEST_CASE("chain capacity is enforced") {
  std::mt19937_64 rng(309);
  ChainSetup setup;
  init_base(setup, rng, 5, 2);
  QnOperator op(setup.base, UpdateKind::U1, 1);
  fill_arbitrary_chain(op, rng, 1);
  REQUIRE(op.ell() == 1);
  CHECK_THROWS_AS((void)op.record_pair(random_vec(rng, 12), random_vec(rng, 12)),
                  std::logic_error);
  QnOperator zero_cap(setup.base, UpdateKind::U1, 0);
  CHECK_THROWS_AS((void)zero_cap.record_pair(random_vec(rng, 12), random_vec(rng, 12)),
                  std::logic_error);
}

TEST_CASE("construction and inputs are validated") {
  std::mt19937_64 rng(310);
  ChainSetup setup;
  init_base(setup, rng, 5, 2);
  CHECK_THROWS_AS(QnOperator(nullptr, UpdateKind::U1, 3), std::invalid_argument);
  CHECK_THROWS_AS(QnOperator(setup.base, UpdateKind::U1, -1), std::invalid_argument);
  QnOperator op(setup.base, UpdateKind::U1, 3);
  CHECK_THROWS_AS((void)op.apply(Vec::Ones(5)), std::invalid_argument);
  CHECK_THROWS_AS((void)op.record_pair(Vec::Ones(5), Vec::Ones(12)),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)op.reset(nullptr), std::invalid_argument);
  CHECK_THROWS_AS((void)dense_oracle_apply(Mat::Zero(12, 12), {}, UpdateKind::U1,
                                           Vec::Ones(12), 5, 2),
                  std::runtime_error);
}

TEST_CASE("update kind names round-trip") {
  CHECK(std::string(to_string(UpdateKind::U1)) == "u1");
  CHECK(std::string(to_string(UpdateKind::U2)) == "u2");
  CHECK(std::string(to_string(UpdateKind::U3)) == "u3");
}

}  // TEST_SUITE("quasinewton")
