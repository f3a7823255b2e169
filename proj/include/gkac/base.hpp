#pragma once

#include "gkac/fibered.hpp"

// C*-bases and C*-factorizations of the groupoid Hilbert space (and of the
// fibered spaces built on it), with their representations rho, compatibility
// checks and pushforwards.
namespace gkac {

/// The commutative C*-base of (G^0, mu): the diagonal multiplication algebra
/// on l^2(G^0, mu). The dagger copy coincides with it.
struct CStarBase {
  Index baseDim = 0;
  RVec mu;
  OperatorSubspace B;

  CMat unitProjection(int u) const {
    CMat e = CMat::Zero(baseDim, baseDim);
    e(u, u) = 1.0;
    return e;
  }
};

inline CStarBase buildBase(const FiniteGroupoid& g, const QuasiInvariantMeasure& qm,
                           TolerancePolicy pol = {}) {
  CStarBase base;
  base.baseDim = g.nUnits();
  base.mu = qm.mu;
  std::vector<CMat> gens;
  for (int u = 0; u < g.nUnits(); ++u) gens.push_back(base.unitProjection(u));
  base.B = OperatorSubspace::span(base.baseDim, base.baseDim, gens, pol);
  if (base.B.dim() != base.baseDim) throw Error("buildBase: base algebra has wrong dimension");
  return base;
}

/// A C*-factorization of a carrier space: a subspace of L(base space, carrier)
/// together with the representation rho of the base algebra on the carrier,
/// stored per unit. Canonical constructions also carry the anchor map
/// (carrier point -> unit) that determines fiber conditions downstream.
struct Factorization {
  std::string name;
  SpacePtr carrier;
  OperatorSubspace space;
  std::vector<CMat> rho;
  std::vector<int> anchor;

  bool anchored() const { return !anchor.empty(); }
  CMat rhoOf(const CVec& baseDiagonal) const {
    CMat out = CMat::Zero(carrier->dim(), carrier->dim());
    for (std::size_t u = 0; u < rho.size(); ++u) out += baseDiagonal(static_cast<Index>(u)) * rho[u];
    return out;
  }
};

struct FactorizationReport {
  double moduleAxiom = 0.0;      // [a* a] = B
  double absorbAxiom = 0.0;      // [a B] = a
  double fullnessDefect = 0.0;   // [a H_base] = carrier
  double rhoRelation = 0.0;      // rho(b) xi = xi b on basis elements
  double rhoStarRep = 0.0;       // rho is a unital *-representation
  double worst() const {
    return std::max({moduleAxiom, absorbAxiom, fullnessDefect, rhoRelation, rhoStarRep});
  }
};

inline std::vector<int> detectAnchor(const OperatorSubspace& space, Index baseDim,
                                     double tol = 1e-10) {
  std::vector<int> anchor(space.rows(), -1);
  for (Index t = 0; t < space.rows(); ++t) {
    int found = -1;
    for (Index u = 0; u < baseDim; ++u) {
      bool touched = false;
      for (const CMat& b : space.basis())
        if (std::abs(b(t, u)) > tol) touched = true;
      if (touched) {
        if (found >= 0) return {};  // two units touch one carrier point
        found = static_cast<int>(u);
      }
    }
    if (found < 0) return {};  // carrier point not reached
    anchor[t] = found;
  }
  return anchor;
}

inline FactorizationReport validateFactorization(const Factorization& f, const CStarBase& base) {
  FactorizationReport rep;
  const TolerancePolicy& pol = f.space.policy();
  // [a* a] = B
  OperatorSubspace prod = f.space.adjointSpace().product(f.space);
  rep.moduleAxiom = prod.equals(base.B).second;
  if (prod.dim() != base.B.dim()) rep.moduleAxiom = std::max(rep.moduleAxiom, 1.0);
  // [a B] = a
  OperatorSubspace absorbed = f.space.product(base.B);
  rep.absorbAxiom = absorbed.equals(f.space).second;
  // [a H_base] = carrier: stack all xi e_u as vectors.
  {
    std::vector<CMat> vecs;
    for (const CMat& b : f.space.basis())
      for (Index u = 0; u < base.baseDim; ++u) vecs.push_back(b.col(u));
    OperatorSubspace reach = OperatorSubspace::span(f.carrier->dim(), 1, vecs, pol);
    rep.fullnessDefect = reach.dim() == f.carrier->dim() ? 0.0 : 1.0;
  }
  // rho(1_u) xi = xi E_uu, elementwise over the basis.
  if (static_cast<Index>(f.rho.size()) != base.baseDim)
    throw Error("validateFactorization: rho list size mismatch");
  for (Index u = 0; u < base.baseDim; ++u) {
    for (const CMat& b : f.space.basis())
      rep.rhoRelation =
          std::max(rep.rhoRelation, opNorm(CMat(f.rho[u] * b - b * base.unitProjection(u))));
    // *-representation of the commutative base: self-adjoint idempotents
    // summing to the identity, pairwise orthogonal.
    rep.rhoStarRep = std::max(rep.rhoStarRep, opNorm(CMat(f.rho[u] - f.rho[u].adjoint())));
    for (Index v = 0; v < base.baseDim; ++v) {
      CMat expect = u == v ? f.rho[u] : CMat(CMat::Zero(f.carrier->dim(), f.carrier->dim()));
      rep.rhoStarRep = std::max(rep.rhoStarRep, opNorm(CMat(f.rho[u] * f.rho[v] - expect)));
    }
  }
  CMat sum = CMat::Zero(f.carrier->dim(), f.carrier->dim());
  for (const CMat& r : f.rho) sum += r;
  rep.rhoStarRep = std::max(rep.rhoStarRep, opNorm(CMat(sum - identityLike(f.carrier->dim()))));
  return rep;
}

/// The factorization alpha = beta = image of the module embedding that
/// multiplies along range fibers: generators sqrt(lambda(a)) E_{a, r(a)},
/// rho = multiplication by f o r.
inline Factorization buildJFactorization(SpaceBank& bank, const CStarBase& base,
                                         TolerancePolicy pol = {}, const std::string& name = "alpha") {
  const FiniteGroupoid& g = bank.groupoid();
  const QuasiInvariantMeasure& qm = bank.measure();
  Factorization f;
  f.name = name;
  f.carrier = bank.arrow();
  std::vector<CMat> gens;
  for (int a = 0; a < g.nArrows(); ++a) {
    CMat m = CMat::Zero(g.nArrows(), g.nUnits());
    m(a, g.range[a]) = std::sqrt(qm.haar.weight(a));
    gens.push_back(m);
  }
  f.space = OperatorSubspace::span(g.nArrows(), g.nUnits(), gens, pol);
  for (int u = 0; u < g.nUnits(); ++u) {
    CMat r = CMat::Zero(g.nArrows(), g.nArrows());
    for (int x = 0; x < g.nArrows(); ++x)
      if (g.range[x] == u) r(x, x) = 1.0;
    f.rho.push_back(r);
  }
  f.anchor.assign(g.range.begin(), g.range.end());
  FactorizationReport rep = validateFactorization(f, base);
  if (rep.worst() >= pol.residual_tol)
    throw Error("buildJFactorization: axioms violated, residual " + sci6(rep.worst()));
  return f;
}

/// The factorization alphahat = betahat from the source-fiber embedding with
/// the D^{-1/2} density: generators sqrt(lambda^{-1}(a)) E_{a, s(a)},
/// rho = multiplication by f o s.
inline Factorization buildJhatFactorization(SpaceBank& bank, const CStarBase& base,
                                            TolerancePolicy pol = {},
                                            const std::string& name = "alphahat") {
  const FiniteGroupoid& g = bank.groupoid();
  const QuasiInvariantMeasure& qm = bank.measure();
  Factorization f;
  f.name = name;
  f.carrier = bank.arrow();
  std::vector<CMat> gens;
  for (int a = 0; a < g.nArrows(); ++a) {
    CMat m = CMat::Zero(g.nArrows(), g.nUnits());
    m(a, g.source[a]) = std::sqrt(qm.haar.weightInv(a));
    gens.push_back(m);
  }
  f.space = OperatorSubspace::span(g.nArrows(), g.nUnits(), gens, pol);
  for (int u = 0; u < g.nUnits(); ++u) {
    CMat r = CMat::Zero(g.nArrows(), g.nArrows());
    for (int x = 0; x < g.nArrows(); ++x)
      if (g.source[x] == u) r(x, x) = 1.0;
    f.rho.push_back(r);
  }
  f.anchor.assign(g.source.begin(), g.source.end());
  FactorizationReport rep = validateFactorization(f, base);
  if (rep.worst() >= pol.residual_tol)
    throw Error("buildJhatFactorization: axioms violated, residual " + sci6(rep.worst()));
  return f;
}

struct CompatibilityReport {
  double absorb12 = 0.0;  // [rho_1(B) space_2] = space_2
  double absorb21 = 0.0;
  double commute = 0.0;   // rho_1 and rho_2 commute
  bool flag = false;
  double worst() const { return std::max({absorb12, absorb21, commute}); }
};

inline CompatibilityReport checkCompatible(const Factorization& f1, const Factorization& f2) {
  if (f1.carrier->signature != f2.carrier->signature)
    throw FlavorError("check_compatible: factorizations live on different spaces");
  CompatibilityReport rep;
  const TolerancePolicy& pol = f1.space.policy();
  auto absorb = [&](const Factorization& a, const Factorization& b) {
    std::vector<CMat> gens;
    for (const CMat& r : a.rho)
      for (const CMat& s : b.space.basis()) gens.push_back(r * s);
    OperatorSubspace span = OperatorSubspace::span(b.space.rows(), b.space.cols(), gens, pol);
    auto [ok, res] = span.equals(b.space);
    (void)ok;
    return res;
  };
  rep.absorb12 = absorb(f1, f2);
  rep.absorb21 = absorb(f2, f1);
  for (const CMat& r : f1.rho)
    for (const CMat& s : f2.rho) rep.commute = std::max(rep.commute, opNorm(CMat(r * s - s * r)));
  rep.flag = rep.worst() < pol.residual_tol;
  return rep;
}

/// Pushforward of a factorization along a unitary of the carrier:
/// space -> U space, rho -> U rho U*.
inline Factorization pushforward(const CMat& usym, const Factorization& f, const CStarBase& base,
                                 bool revalidate = true) {
  if (usym.rows() != f.carrier->dim() || usym.cols() != f.carrier->dim())
    throw ShapeError("pushforward: unitary shape mismatch");
  double unit = opNorm(CMat(usym.adjoint() * usym - identityLike(usym.rows())));
  if (unit >= f.space.policy().residual_tol)
    throw Error("pushforward: map is not unitary, defect " + sci6(unit));
  Factorization out;
  out.name = "U*" + f.name;
  out.carrier = f.carrier;
  std::vector<CMat> gens;
  for (const CMat& b : f.space.basis()) gens.push_back(usym * b);
  out.space = OperatorSubspace::span(f.space.rows(), f.space.cols(), gens, f.space.policy());
  for (const CMat& r : f.rho) out.rho.push_back(usym * r * usym.adjoint());
  out.anchor = detectAnchor(out.space, base.baseDim);
  if (revalidate) {
    FactorizationReport rep = validateFactorization(out, base);
    if (rep.worst() >= f.space.policy().residual_tol)
      throw Error("pushforward: image violates factorization axioms");
  }
  return out;
}

/// V_*(factorization subspace): the image span under a flavored unitary,
/// compared downstream against a named factorization by subspace equality.
inline OperatorSubspace mapSubspace(const Flavored& v, const OperatorSubspace& s) {
  if (v.m.cols() != s.rows()) throw ShapeError("mapSubspace: shape mismatch");
  std::vector<CMat> gens;
  for (const CMat& b : s.basis()) gens.push_back(v.m * b);
  return OperatorSubspace::span(v.m.rows(), s.cols(), gens, s.policy());
}

}  // namespace gkac
