#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gkac/subspace.hpp"

using namespace gkac;

namespace {

CMat unit(Index n, Index m, Index i, Index j) {
  CMat e = CMat::Zero(n, m);
  e(i, j) = 1.0;
  return e;
}

CMat randomMatrix(std::mt19937_64& rng, Index n, Index m) {
  std::normal_distribution<double> g;
  CMat out(n, m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i) out(i, j) = Complex(g(rng), g(rng));
  return out;
}

CMat randomUnitary(std::mt19937_64& rng, Index n) {
  Eigen::HouseholderQR<CMat> qr(randomMatrix(rng, n, n));
  CMat q = qr.householderQ();
  return q;
}

OperatorSubspace diag2() {
  return OperatorSubspace::span(2, 2, {unit(2, 2, 0, 0), unit(2, 2, 1, 1)});
}

OperatorSubspace antidiag2() {
  return OperatorSubspace::span(2, 2, {unit(2, 2, 0, 1), unit(2, 2, 1, 0)});
}

}  // namespace

TEST_CASE("orthonormalize: empty, collinear, matrix units") {
  auto empty = OperatorSubspace::span(2, 2, {});
  CHECK(empty.dim() == 0);

  CMat i2 = identityLike(2);
  auto line = OperatorSubspace::span(2, 2, {i2, 2.0 * i2});
  CHECK(line.dim() == 1);
  CHECK(line.contains(i2 / std::sqrt(2.0)).first);

  // The four 2x2 matrix units: Gram matrix is the identity, rank 4.
  auto full = OperatorSubspace::span(
      2, 2, {unit(2, 2, 0, 0), unit(2, 2, 0, 1), unit(2, 2, 1, 0), unit(2, 2, 1, 1)});
  CHECK(full.dim() == 4);
}

TEST_CASE("orthonormalize: projection residual of generators") {
  std::mt19937_64 rng(7);
  std::vector<CMat> gens;
  for (int i = 0; i < 6; ++i) gens.push_back(randomMatrix(rng, 3, 2));
  auto s = OperatorSubspace::span(3, 2, gens);
  for (const CMat& g : gens) {
    auto [ok, res] = s.contains(g);
    CHECK(ok);
    CHECK(res < 1e-8);
  }
}

TEST_CASE("orthonormalize: non-finite generators rejected") {
  CMat bad = identityLike(2);
  bad(0, 0) = Complex(std::numeric_limits<double>::infinity(), 0.0);
  CHECK_THROWS_AS(OperatorSubspace::span(2, 2, {bad}), Error);
}

TEST_CASE("span_product: identity factor, diagonal algebra, zero space") {
  std::mt19937_64 rng(11);
  CMat x = randomMatrix(rng, 2, 2);
  auto idSpan = OperatorSubspace::span(2, 2, {identityLike(2)});
  auto xSpan = OperatorSubspace::span(2, 2, {x});
  auto prod = idSpan.product(xSpan);
  CHECK(prod.equals(xSpan).first);

  auto dd = diag2().product(diag2());
  CHECK(dd.dim() == 2);
  CHECK(dd.equals(diag2()).first);

  auto zero = OperatorSubspace::zero(2, 2);
  CHECK(zero.product(xSpan).dim() == 0);

  auto rect = OperatorSubspace::span(2, 3, {randomMatrix(rng, 2, 3)});
  CHECK_THROWS_AS(rect.product(rect), ShapeError);
}

TEST_CASE("adjoint, sum, intersection") {
  auto e12 = OperatorSubspace::span(2, 2, {unit(2, 2, 0, 1)});
  auto e21 = OperatorSubspace::span(2, 2, {unit(2, 2, 1, 0)});
  CHECK(e12.adjointSpace().equals(e21).first);

  auto all = diag2().sum(antidiag2());
  CHECK(all.dim() == 4);

  auto d = diag2();
  CHECK(d.intersect(d).equals(d).first);
  CHECK(diag2().intersect(antidiag2()).dim() == 0);

  // Intersection elements lie in both inputs.
  std::mt19937_64 rng(3);
  std::vector<CMat> ga, gb;
  CMat common = randomMatrix(rng, 3, 3);
  ga = {common, randomMatrix(rng, 3, 3)};
  gb = {common, randomMatrix(rng, 3, 3)};
  auto a = OperatorSubspace::span(3, 3, ga);
  auto b = OperatorSubspace::span(3, 3, gb);
  auto cap = a.intersect(b);
  CHECK(cap.dim() == 1);
  for (const CMat& m : cap.basis()) {
    CHECK(a.contains(m).first);
    CHECK(b.contains(m).first);
  }
}

TEST_CASE("contains") {
  auto idSpan = OperatorSubspace::span(2, 2, {identityLike(2)});
  auto [ok1, r1] = idSpan.contains(3.0 * identityLike(2));
  CHECK(ok1);
  CHECK(r1 < 1e-12);

  // E12 is HS-orthogonal to the identity and has unit norm.
  auto [ok2, r2] = idSpan.contains(unit(2, 2, 0, 1));
  CHECK_FALSE(ok2);
  CHECK(r2 == Catch::Approx(1.0));

  auto zero = OperatorSubspace::zero(2, 2);
  auto [ok3, r3] = zero.contains(CMat::Zero(2, 2));
  CHECK(ok3);
  CHECK(r3 == 0.0);
}

TEST_CASE("subspace_equal") {
  auto idSpan = OperatorSubspace::span(2, 2, {identityLike(2)});
  auto idSpan2 = OperatorSubspace::span(2, 2, {2.0 * identityLike(2)});
  auto e11 = OperatorSubspace::span(2, 2, {unit(2, 2, 0, 0)});

  auto [eq1, res1] = idSpan.equals(idSpan);
  CHECK(eq1);
  CHECK(res1 < 1e-15);
  CHECK(idSpan.equals(idSpan2).first);
  auto [eq3, res3] = idSpan.equals(e11);
  CHECK_FALSE(eq3);
  CHECK(res3 > 0.1);
}

TEST_CASE("commutant: Schur, scalars, maximal abelian") {
  auto full = OperatorSubspace::span(
      2, 2, {unit(2, 2, 0, 0), unit(2, 2, 0, 1), unit(2, 2, 1, 0), unit(2, 2, 1, 1)});
  auto comm = full.commutant();
  CHECK(comm.dim() == 1);
  CHECK(comm.contains(identityLike(2)).first);

  auto scalars = OperatorSubspace::span(2, 2, {identityLike(2)});
  CHECK(scalars.commutant().dim() == 4);

  CHECK(diag2().commutant().equals(diag2()).first);

  CHECK_THROWS_AS(OperatorSubspace::span(2, 3, {CMat::Ones(2, 3)}).commutant(),
                  ShapeError);
}

TEST_CASE("commutant elements commute with the span") {
  std::mt19937_64 rng(23);
  auto s = OperatorSubspace::span(3, 3, {randomMatrix(rng, 3, 3), randomMatrix(rng, 3, 3)});
  auto c = s.commutant();
  for (const CMat& t : c.basis())
    for (const CMat& b : s.basis()) CHECK(opNorm(t * b - b * t) < 1e-8);
}

TEST_CASE("solve_membership_constraints: examples") {
  // No constraints -> the full matrix space.
  auto full = solveMembership(2, 2, {});
  CHECK(full.dim() == 4);

  // T * I in the zero subspace -> zero space.
  MembershipConstraint toZero{identityLike(2), identityLike(2),
                              OperatorSubspace::zero(2, 2), false};
  CHECK(solveMembership(2, 2, {toZero}).dim() == 0);

  // T e1 in span{e1} and T^* e1 in span{e1} -> diagonal-block space, dim 2.
  CMat e1 = CMat::Zero(2, 1);
  e1(0, 0) = 1.0;
  auto spanE1 = OperatorSubspace::span(2, 1, {e1});
  MembershipConstraint c1{identityLike(2), e1, spanE1, false};
  MembershipConstraint c2{identityLike(2), e1, spanE1, true};
  auto sol = solveMembership(2, 2, {c1, c2});
  CHECK(sol.dim() == 2);
  CHECK(sol.contains(unit(2, 2, 0, 0)).first);
  CHECK(sol.contains(unit(2, 2, 1, 1)).first);
  CHECK_FALSE(sol.contains(unit(2, 2, 0, 1)).first);
}

TEST_CASE("is_algebra") {
  auto full = OperatorSubspace::span(
      2, 2, {unit(2, 2, 0, 0), unit(2, 2, 0, 1), unit(2, 2, 1, 0), unit(2, 2, 1, 1)});
  CHECK(full.isAlgebra().first);

  auto e12 = OperatorSubspace::span(2, 2, {unit(2, 2, 0, 1)});
  CHECK_FALSE(e12.isAlgebra().first);

  CHECK(diag2().isAlgebra().first);
}

TEST_CASE("property: idempotent orthonormalization") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<CMat> gens;
    for (int i = 0; i < 5; ++i) gens.push_back(randomMatrix(rng, 3, 3));
    auto s = OperatorSubspace::span(3, 3, gens);
    auto s2 = OperatorSubspace::span(3, 3, s.basis());
    CHECK(s2.dim() == s.dim());
    CHECK(s2.equals(s).first);
  }
}

TEST_CASE("property: product associativity as subspaces") {
  std::mt19937_64 rng(202);
  for (int trial = 0; trial < 4; ++trial) {
    auto s = OperatorSubspace::span(2, 3, {randomMatrix(rng, 2, 3), randomMatrix(rng, 2, 3)});
    auto t = OperatorSubspace::span(3, 2, {randomMatrix(rng, 3, 2)});
    auto u = OperatorSubspace::span(2, 2, {randomMatrix(rng, 2, 2), randomMatrix(rng, 2, 2)});
    auto lhs = s.product(t).product(u);
    auto rhs = s.product(t.product(u));
    auto [ok, res] = lhs.equals(rhs);
    CHECK(ok);
    CHECK(res < 1e-8);
  }
}

TEST_CASE("property: commutant is inclusion-reversing; bicommutant") {
  std::mt19937_64 rng(303);
  for (int trial = 0; trial < 3; ++trial) {
    CMat a = randomMatrix(rng, 3, 3);
    CMat b = randomMatrix(rng, 3, 3);
    auto small = OperatorSubspace::span(3, 3, {a});
    auto big = OperatorSubspace::span(3, 3, {a, b});
    auto cb = big.commutant();
    auto cs = small.commutant();
    for (const CMat& m : cb.basis()) CHECK(cs.contains(m).first);
  }

  // Bicommutant of a self-adjoint unital algebra equals the algebra:
  // a unitarily rotated diagonal algebra inside M3.
  std::mt19937_64 rng2(404);
  CMat q = randomUnitary(rng2, 3);
  std::vector<CMat> gens;
  for (Index i = 0; i < 3; ++i) gens.push_back(q * unit(3, 3, i, i) * q.adjoint());
  auto alg = OperatorSubspace::span(3, 3, gens);
  REQUIRE(alg.isAlgebra().first);
  auto bicom = alg.commutant().commutant();
  CHECK(bicom.equals(alg).first);
}

TEST_CASE("property: tensor-leg membership constraints produce an algebra") {
  // Plain (non-relative) two-leg version of the fiber-product constraint
  // family: for self-adjoint algebras A on C^2 and B on C^2, the space of T
  // on C^4 with T|e_i>_1, T^*|e_i>_1 in [kets B] and T|f_j>_2, T^*|f_j>_2 in
  // [kets A] is an algebra.
  std::mt19937_64 rng(505);
  CMat q1 = randomUnitary(rng, 2), q2 = randomUnitary(rng, 2);
  std::vector<CMat> aGens, bGens;
  for (Index i = 0; i < 2; ++i) {
    aGens.push_back(q1 * unit(2, 2, i, i) * q1.adjoint());
    bGens.push_back(q2 * unit(2, 2, i, i) * q2.adjoint());
  }
  auto algA = OperatorSubspace::span(2, 2, aGens);
  auto algB = OperatorSubspace::span(2, 2, bGens);

  // kets: |v>_1 : C^2 -> C^4 = v (x) I (first leg), |w>_2 = I (x) w.
  auto ket1 = [](const CVec& v) {
    CMat k = CMat::Zero(4, 2);
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 2; ++j) k(i * 2 + j, j) = v(i);
    return k;
  };
  auto ket2 = [](const CVec& w) {
    CMat k = CMat::Zero(4, 2);
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 2; ++j) k(i * 2 + j, i) = w(j);
    return k;
  };
  std::vector<CMat> kets1B, kets2A;
  std::vector<CMat> kets1, kets2;
  for (Index i = 0; i < 2; ++i) {
    CVec e = CVec::Zero(2);
    e(i) = 1.0;
    kets1.push_back(ket1(e));
    kets2.push_back(ket2(e));
  }
  for (const CMat& k : kets1)
    for (const CMat& b : algB.basis()) kets1B.push_back(k * b);
  for (const CMat& k : kets2)
    for (const CMat& a : algA.basis()) kets2A.push_back(k * a);
  auto target1 = OperatorSubspace::span(4, 2, kets1B);
  auto target2 = OperatorSubspace::span(4, 2, kets2A);

  std::vector<MembershipConstraint> cons;
  for (const CMat& k : kets1) {
    cons.push_back({identityLike(4), k, target1, false});
    cons.push_back({identityLike(4), k, target1, true});
  }
  for (const CMat& k : kets2) {
    cons.push_back({identityLike(4), k, target2, false});
    cons.push_back({identityLike(4), k, target2, true});
  }
  auto fib = solveMembership(4, 4, cons);
  CHECK(fib.dim() > 0);
  auto [isAlg, res] = fib.isAlgebra();
  CHECK(isAlg);
  CHECK(res < 1e-8);
}
