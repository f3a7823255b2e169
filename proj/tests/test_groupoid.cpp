#include <catch2/catch_amalgamated.hpp>

#include "gkac/groupoid.hpp"

using namespace gkac;

namespace {

FiniteGroupoid trivialGroupoid() { return makeCyclicGroup(1); }

FiniteGroupoid z2() { return makeCyclicGroup(2); }

FiniteGroupoid swapAction() {
  // Z/2 acting on {a, b} by the swap.
  return makeTransformationGroupoid(makeCyclicGroup(2), {"a", "b"},
                                    {{0, 1}, {1, 0}});
}

}  // namespace

TEST_CASE("validate: trivial groupoid and Z/2 pass") {
  CHECK(validateGroupoid(trivialGroupoid()).pass());
  CHECK(validateGroupoid(z2()).pass());
}

TEST_CASE("validate: corrupted inverse map is reported") {
  FiniteGroupoid g = makePairGroupoid(2);
  REQUIRE(validateGroupoid(g).pass());
  // Corrupt: make inversion the identity map. a12^{-1} should be a21.
  for (int x = 0; x < g.nArrows(); ++x) g.inverse[x] = x;
  ValidationReport rep = validateGroupoid(g);
  CHECK_FALSE(rep.pass());
  bool foundInverseIssue = false;
  for (const auto& i : rep.issues)
    if (i.axiom == "inverse") foundInverseIssue = true;
  CHECK(foundInverseIssue);
}

TEST_CASE("constructors: counts and maps") {
  FiniteGroupoid p2 = makePairGroupoid(2);
  CHECK(p2.nArrows() == 4);
  CHECK(p2.nUnits() == 2);
  // s(i,j) = j, r(i,j) = i.
  int a12 = p2.arrowIndex("a12");
  CHECK(p2.range[a12] == p2.unitIndex("p1"));
  CHECK(p2.source[a12] == p2.unitIndex("p2"));

  FiniteGroupoid z3 = makeCyclicGroup(3);
  CHECK(z3.nArrows() == 3);
  CHECK(z3.nUnits() == 1);

  FiniteGroupoid tg = swapAction();
  CHECK(tg.nArrows() == 4);
  CHECK(tg.nUnits() == 2);
  CHECK(validateGroupoid(tg).pass());

  FiniteGroupoid bundle = makeGroupBundle({makeCyclicGroup(2), makeCyclicGroup(3)});
  CHECK(bundle.nArrows() == 5);
  CHECK(bundle.nUnits() == 2);
  CHECK(validateGroupoid(bundle).pass());
}

TEST_CASE("constructors: malformed inputs rejected") {
  // Not a Latin square.
  Eigen::MatrixXi bad(2, 2);
  bad << 0, 0, 1, 1;
  CHECK_THROWS_AS(makeGroup({"e", "g"}, bad), Error);

  // Action that is not a homomorphism: Z/2 acting with t -> 3-cycle.
  CHECK_THROWS_AS(
      makeTransformationGroupoid(makeCyclicGroup(2), {"a", "b", "c"},
                                 {{0, 1, 2}, {1, 2, 0}}),
      Error);
}

TEST_CASE("counting Haar: invariance exact, fiber mass") {
  FiniteGroupoid p3 = makePairGroupoid(3);
  HaarSystem h = countingHaar(p3);
  CHECK(h.maxInvarianceDefect(p3) == 0.0);
  for (int u = 0; u < p3.nUnits(); ++u) {
    double mass = 0.0;
    for (int x : p3.rangeFiber(u)) mass += h.weight(x);
    CHECK(mass == Catch::Approx(3.0));
  }
  HaarSystem hz = countingHaar(z2());
  CHECK(hz.weight.sum() == Catch::Approx(2.0));
}

TEST_CASE("general Haar systems: constant on source fibers is the valid shape") {
  FiniteGroupoid p2 = makePairGroupoid(2);
  // lambda(x) = c(s(x)) is left invariant.
  RVec w(4);
  for (int x = 0; x < 4; ++x) w(x) = p2.source[x] == 0 ? 1.0 : 2.0;
  HaarSystem h = makeHaar(p2, w);
  CHECK(h.maxInvarianceDefect(p2) == 0.0);
  // A generic perturbation is rejected.
  RVec wbad = w;
  wbad(p2.arrowIndex("a12")) *= 3.0;
  CHECK_THROWS_AS(makeHaar(p2, wbad), Error);
}

TEST_CASE("measures: D on groups, pair groupoids, bundles") {
  // Z/2 with mu = 1: D == 1.
  FiniteGroupoid g = z2();
  QuasiInvariantMeasure q = makeMeasure(g, countingHaar(g), RVec::Ones(1));
  CHECK((q.D.array() - 1.0).abs().maxCoeff() == 0.0);

  // pair(2), mu = (1,2): D(i,j) = mu(i)/mu(j); D(a12) = 1/2.
  FiniteGroupoid p2 = makePairGroupoid(2);
  RVec mu(2);
  mu << 1.0, 2.0;
  QuasiInvariantMeasure qp = makeMeasure(p2, countingHaar(p2), mu);
  CHECK(qp.D(p2.arrowIndex("a12")) == Catch::Approx(0.5));
  CHECK(qp.D(p2.arrowIndex("a21")) == Catch::Approx(2.0));

  // Group bundle with any mu: r = s, so D == 1.
  FiniteGroupoid bundle = makeGroupBundle({makeCyclicGroup(2), makeCyclicGroup(3)});
  RVec mub(2);
  mub << 1.0, 5.0;
  QuasiInvariantMeasure qb = makeMeasure(bundle, countingHaar(bundle), mub);
  CHECK((qb.D.array() - 1.0).abs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(makeMeasure(p2, countingHaar(p2), RVec::Zero(2)), Error);
}

TEST_CASE("properties: involution, bijection, fiber counts, cocycle, mass") {
  std::vector<FiniteGroupoid> corpus = {
      trivialGroupoid(), z2(), makeCyclicGroup(3), makePairGroupoid(3),
      makeGroupBundle({makeCyclicGroup(2), makeCyclicGroup(3)}), swapAction()};
  for (const auto& g : corpus) {
    // Inversion is an involutive bijection.
    std::vector<bool> seen(g.nArrows(), false);
    for (int x = 0; x < g.nArrows(); ++x) {
      CHECK(g.inverse[g.inverse[x]] == x);
      seen[g.inverse[x]] = true;
    }
    for (bool b : seen) CHECK(b);
    // Left translation bijectivity: |G^{s(x)}| = |G^{r(x)}|.
    for (int x = 0; x < g.nArrows(); ++x)
      CHECK(g.rangeFiber(g.source[x]).size() == g.rangeFiber(g.range[x]).size());

    RVec mu(g.nUnits());
    for (int u = 0; u < g.nUnits(); ++u) mu(u) = 1.0 + 0.5 * u;
    QuasiInvariantMeasure q = makeMeasure(g, countingHaar(g), mu);
    CHECK(q.maxCocycleDefect(g) < 1e-12);
    CHECK(q.maxInvolutionDefect(g) < 1e-12);
    // nu(G) = sum_u mu(u) |G^u| under counting Haar.
    double expected = 0.0;
    for (int u = 0; u < g.nUnits(); ++u) expected += mu(u) * g.rangeFiber(u).size();
    CHECK(q.totalMass(g) == Catch::Approx(expected));
  }
}
