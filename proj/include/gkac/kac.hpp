#pragma once

#include "gkac/report.hpp"
#include "gkac/rtp.hpp"

// The Kac-system workbench: the multiplication unitary V and the inversion
// symmetry U of a finite groupoid with quasi-invariant measure, the derived
// unitaries Vcheck/Vhat/Vop, the two leg algebras with their
// comultiplications, and the full axiom battery (pentagon, intertwining,
// regularity, commutation conditions, cube condition, leg identities).
namespace gkac {

namespace detail {
inline QuasiInvariantMeasure makeMeasureUnchecked(const FiniteGroupoid& g, const HaarSystem& haar,
                                                  const RVec& mu) {
  QuasiInvariantMeasure q;
  q.mu = mu;
  q.haar = haar;
  q.nu.resize(g.nArrows());
  for (int x = 0; x < g.nArrows(); ++x) q.nu(x) = mu(g.range[x]) * haar.weight(x);
  q.nuInv.resize(g.nArrows());
  for (int x = 0; x < g.nArrows(); ++x) q.nuInv(x) = q.nu(g.inverse[x]);
  q.D = q.nu.cwiseQuotient(q.nuInv);
  return q;
}
}  // namespace detail

/// Documented corruption hooks for negative controls. Each one produces a
/// deliberately broken system so the test suite can prove the checks have
/// power; "identity-U" replaces the symmetry wholesale and is used by the
/// commutation-condition tests.
inline const std::vector<std::string>& negativeControls() {
  static const std::vector<std::string> names = {"flip-U-sign", "perturb-one-haar-weight",
                                                 "rotate-alphahat"};
  return names;
}

class KacSystem {
 public:
  FiniteGroupoid g;
  QuasiInvariantMeasure qm;
  TolerancePolicy pol;
  SpaceBank bank;
  CStarBase base;
  Factorization alpha, beta, alphahat, betahat;
  CMat U;
  Flavored V, Vcheck, Vhat, Vop;
  std::string control;

  KacSystem(const KacSystem&) = delete;
  KacSystem& operator=(const KacSystem&) = delete;

  KacSystem(FiniteGroupoid gg, HaarSystem haar, RVec mu, TolerancePolicy policy = {},
            const std::string& negativeControl = "")
      : g(std::move(gg)), pol(policy), control(negativeControl) {
    pol.validate();
    if (control == "perturb-one-haar-weight") {
      int target = 0;
      for (int x = 0; x < g.nArrows(); ++x) {
        bool isUnit = false;
        for (int u : g.unitArrow)
          if (u == x) isUnit = true;
        if (!isUnit) {
          target = x;
          break;
        }
      }
      haar.weight(target) *= 2.0;
      for (int x = 0; x < g.nArrows(); ++x) haar.weightInv(x) = haar.weight(g.inverse[x]);
    }
    qm = detail::makeMeasureUnchecked(g, haar, mu);
    bank = SpaceBank(&g, &qm);
    base = buildBase(g, qm, pol);
    alpha = buildJFactorization(bank, base, pol, "alpha");
    beta = buildJFactorization(bank, base, pol, "beta");
    alphahat = buildJhatFactorization(bank, base, pol, "alphahat");
    betahat = buildJhatFactorization(bank, base, pol, "betahat");
    buildU();
    if (control == "flip-U-sign") U.col(g.unitArrow[0]) *= -1.0;
    buildV();
    buildDerivedUnitaries();
    if (control == "rotate-alphahat") {
      rotateHat(alphahat);
      rotateHat(betahat);
    } else if (control == "identity-U") {
      U = identityLike(g.nArrows());
    } else if (!control.empty() && control != "flip-U-sign" &&
               control != "perturb-one-haar-weight") {
      throw Error("unknown negative control: " + control);
    }
  }

  SpacePtr arrowSpace() { return bank.arrow(); }
  Flavored uOp() { return Flavored(U, bank.arrow(), bank.arrow()); }

 private:
  /// (U xi)(x) = xi(x^-1) D(x)^{-1/2}: in delta coordinates the matrix is
  /// U_d[x,y] = delta_{x,y^-1} D(x)^{-1/2}; rescaling to the orthonormal
  /// basis gives U_e[x,y] = delta_{x,y^-1} sqrt(nuInv(x)/nu(y)), and
  /// nuInv(y^-1) = nu(y), so the matrix is an exact permutation.
  void buildU() {
    const int n = g.nArrows();
    U = CMat::Zero(n, n);
    for (int y = 0; y < n; ++y) {
      int x = g.inverse[y];
      U(x, y) = std::sqrt(qm.nuInv(x) / qm.nu(y));
    }
  }

  /// (V zeta)(x,y) = zeta(x, x^-1 y): support (a,b) -> (a, ab) from the
  /// composable-pair space to the range-fibered pair space, with the
  /// orthonormal-basis scale sqrt(w_dst(a,ab)/w_src(a,b)); left invariance
  /// of lambda makes the scale exactly one.
  void buildV() {
    SpacePtr src = bank.pair("s", "r");
    SpacePtr dst = bank.pair("r", "r");
    CMat m = CMat::Zero(dst->dim(), src->dim());
    for (Index t = 0; t < src->dim(); ++t) {
      int a = src->pts[t][0];
      int b = src->pts[t][1];
      int ab = g.mult(a, b);
      if (ab < 0) throw Error("buildV: non-composable pair in the source space");
      Point q{a, ab, -1, -1};
      int td = dst->find(q);
      if (td < 0) throw Error("buildV: image point missing in the target space");
      m(td, t) = std::sqrt(dst->weight(td) / src->weight(t));
    }
    V = Flavored(std::move(m), src, dst);
  }

  void buildDerivedUnitaries() {
    Flavored u = uOp();
    // Vcheck = Sigma U2 V U2 Sigma : (s,s) -> (s,r).
    {
      Flavored s1 = flip(bank, bank.pair("s", "s"));
      Flavored u2a = liftToSlot(bank, s1.dst, u, 1);
      Flavored u2b = liftToSlot(bank, V.dst, u, 1);
      Flavored s2 = flip(bank, u2b.dst);
      Vcheck = s2 * u2b * V * u2a * s1;
    }
    // Vhat = Sigma U1 V U1 Sigma : (r,r) -> (r,s).
    {
      Flavored s1 = flip(bank, bank.pair("r", "r"));
      Flavored u1a = liftToSlot(bank, s1.dst, u, 0);
      Flavored u1b = liftToSlot(bank, V.dst, u, 0);
      Flavored s2 = flip(bank, u1b.dst);
      Vhat = s2 * u1b * V * u1a * s1;
    }
    // Vop = Sigma V* Sigma : (r,r) -> (r,s).
    {
      Flavored s1 = flip(bank, bank.pair("r", "r"));
      Flavored s2 = flip(bank, V.src);
      Vop = s2 * V.adjoint() * s1;
    }
  }

  void rotateHat(Factorization& f) {
    // Deterministic ambient rotation: mix the first basis element toward a
    // matrix unit outside the span when one exists. On a one-unit groupoid
    // the factorization is the full matrix space and the rotation is inert.
    if (f.space.dim() == 0) return;
    CMat outside = CMat::Zero(f.space.rows(), f.space.cols());
    outside(0, (f.anchor.empty() ? 0 : (f.anchor[0] + 1) % base.baseDim)) = 1.0;
    CMat ortho = outside - f.space.project(outside);
    double nrm = hsNorm(ortho);
    if (nrm < 1e-9) return;  // span is full; rotation cannot leave it
    const double theta = 0.3;
    std::vector<CMat> gens = f.space.basis();
    gens[0] = std::cos(theta) * gens[0] + std::sin(theta) * (ortho / nrm);
    f.space = OperatorSubspace::span(f.space.rows(), f.space.cols(), gens, pol);
    f.anchor = detectAnchor(f.space, base.baseDim);
  }
};

/// A balanced system with relabeled factorizations: the machinery for V
/// applies verbatim to Vcheck (predual), Vhat (dual) and Vop (opposite).
struct SystemView {
  std::string tag;
  Factorization a, ahat, b, bhat;
  Flavored W;
};

inline SystemView primaryView(const KacSystem& ks) {
  return {"v", ks.alpha, ks.alphahat, ks.beta, ks.betahat, ks.V};
}
inline SystemView predualView(const KacSystem& ks) {
  return {"vcheck", ks.betahat, ks.beta, ks.alpha, ks.alphahat, ks.Vcheck};
}
inline SystemView dualView(const KacSystem& ks) {
  return {"vhat", ks.beta, ks.betahat, ks.alphahat, ks.alpha, ks.Vhat};
}
inline SystemView oppositeView(const KacSystem& ks) {
  return {"vop", ks.alpha, ks.alphahat, ks.betahat, ks.beta, ks.Vop};
}

inline std::string anchorNameOf(const KacSystem& ks, const Factorization& f) {
  if (!f.anchored()) throw FlavorError("factorization " + f.name + " carries no anchor map");
  bool isR = true, isS = true;
  for (int x = 0; x < ks.g.nArrows(); ++x) {
    if (f.anchor[x] != ks.g.range[x]) isR = false;
    if (f.anchor[x] != ks.g.source[x]) isS = false;
  }
  if (isR) return "r";
  if (isS) return "s";
  throw FlavorError("factorization " + f.name + " is not range- or source-anchored");
}

/// Derived unitaries of an arbitrary balanced view (used to iterate the
/// predual/dual constructions).
struct DerivedTriple {
  Flavored Vcheck, Vhat, Vop;
};

inline DerivedTriple buildDerived(KacSystem& ks, const SystemView& view) {
  Flavored u = ks.uOp();
  std::string na = anchorNameOf(ks, view.a);
  std::string nah = anchorNameOf(ks, view.ahat);
  std::string nb = anchorNameOf(ks, view.b);
  std::string nbh = anchorNameOf(ks, view.bhat);
  DerivedTriple out;
  {
    Flavored s1 = flip(ks.bank, ks.bank.pair(nah, nbh));
    Flavored u2a = liftToSlot(ks.bank, s1.dst, u, 1);
    Flavored u2b = liftToSlot(ks.bank, view.W.dst, u, 1);
    Flavored s2 = flip(ks.bank, u2b.dst);
    out.Vcheck = s2 * u2b * view.W * u2a * s1;
  }
  {
    Flavored s1 = flip(ks.bank, ks.bank.pair(na, nb));
    Flavored u1a = liftToSlot(ks.bank, s1.dst, u, 0);
    Flavored u1b = liftToSlot(ks.bank, view.W.dst, u, 0);
    Flavored s2 = flip(ks.bank, u1b.dst);
    out.Vhat = s2 * u1b * view.W * u1a * s1;
  }
  {
    Flavored s1 = flip(ks.bank, ks.bank.pair(nb, na));
    Flavored s2 = flip(ks.bank, view.W.src);
    out.Vop = s2 * view.W.adjoint() * s1;
  }
  return out;
}

/// The two legs of a view: Ahat(W) = [<b|_2 W |a>_2], A(W) = [<a|_1 W |bhat>_1],
/// with their generator-indexed comultiplications
/// Dhat(y) = W*(1 x y)W and D(z) = W(z x 1)W*.
struct Legs {
  OperatorSubspace Ahat, A;
  std::vector<Flavored> deltaHat;  // indexed by Ahat basis
  std::vector<Flavored> delta;     // indexed by A basis
};

inline Flavored comultiplyRight(KacSystem& ks, const Flavored& W, const CMat& y) {
  Flavored lift = liftToSlot(ks.bank, W.dst, Flavored(y, ks.bank.arrow(), ks.bank.arrow()), 1);
  return W.adjoint() * lift * W;
}

inline Flavored comultiplyLeft(KacSystem& ks, const Flavored& W, const CMat& z) {
  Flavored lift = liftToSlot(ks.bank, W.src, Flavored(z, ks.bank.arrow(), ks.bank.arrow()), 0);
  return W * lift * W.adjoint();
}

inline Legs computeLegs(KacSystem& ks, const SystemView& view) {
  Legs out;
  std::vector<Flavored> ketsSrc = legKets(ks.bank, view.W.src, {1}, view.a);
  std::vector<Flavored> brasDst = legKets(ks.bank, view.W.dst, {1}, view.b);
  std::vector<CMat> gens;
  for (const Flavored& bra : brasDst)
    for (const Flavored& ket : ketsSrc) gens.push_back((bra.adjoint() * view.W * ket).m);
  out.Ahat = OperatorSubspace::span(ks.g.nArrows(), ks.g.nArrows(), gens, ks.pol);

  std::vector<Flavored> kets1 = legKets(ks.bank, view.W.src, {0}, view.bhat);
  std::vector<Flavored> bras1 = legKets(ks.bank, view.W.dst, {0}, view.a);
  gens.clear();
  for (const Flavored& bra : bras1)
    for (const Flavored& ket : kets1) gens.push_back((bra.adjoint() * view.W * ket).m);
  out.A = OperatorSubspace::span(ks.g.nArrows(), ks.g.nArrows(), gens, ks.pol);

  for (const CMat& y : out.Ahat.basis()) out.deltaHat.push_back(comultiplyRight(ks, view.W, y));
  for (const CMat& z : out.A.basis()) out.delta.push_back(comultiplyLeft(ks, view.W, z));
  return out;
}

/// comultiply as a standalone operation: checks membership first, then
/// conjugates. which = "ahat" or "a".
inline Flavored comultiply(KacSystem& ks, const Legs& legs, const std::string& which,
                           const CMat& element) {
  if (which == "ahat") {
    auto [ok, res] = legs.Ahat.contains(element);
    if (!ok) throw Error("comultiply: element outside Ahat, residual " + sci6(res));
    return comultiplyRight(ks, ks.V, element);
  }
  if (which == "a") {
    auto [ok, res] = legs.A.contains(element);
    if (!ok) throw Error("comultiply: element outside A, residual " + sci6(res));
    return comultiplyLeft(ks, ks.V, element);
  }
  throw Error("comultiply: which must be 'ahat' or 'a'");
}

/// Span of the triangle [ kets(legFact) . gamma ] without building the full
/// factorization object (the intertwining checks only compare subspaces).
inline OperatorSubspace triangleSpan(KacSystem& ks, const SpacePtr& space, int ketSlot,
                                     const Factorization& legFact, const Factorization& gamma) {
  std::vector<Flavored> kets = legKets(ks.bank, space, {ketSlot}, legFact);
  std::vector<CMat> gens;
  for (const Flavored& k : kets)
    for (const CMat& c : gamma.space.basis()) gens.push_back(k.m * c);
  return OperatorSubspace::span(space->dim(), ks.base.baseDim, gens, ks.pol);
}

/// The six intertwining relations of a balanced view: the four defining ones
/// and the two derived ones, in a fixed order. Residuals are subspace
/// equality defects of W(LHS) against RHS.
inline std::vector<double> intertwineResiduals(KacSystem& ks, const SystemView& view) {
  const SpacePtr src = view.W.src;
  const SpacePtr dst = view.W.dst;
  auto lhsLt = [&](const Factorization& gamma) { return triangleSpan(ks, src, 1, view.a, gamma); };
  auto lhsRt = [&](const Factorization& delta) {
    return triangleSpan(ks, src, 0, view.bhat, delta);
  };
  auto rhsLt = [&](const Factorization& gamma) { return triangleSpan(ks, dst, 1, view.b, gamma); };
  auto rhsRt = [&](const Factorization& delta) { return triangleSpan(ks, dst, 0, view.a, delta); };

  std::vector<std::pair<OperatorSubspace, OperatorSubspace>> rel;
  rel.push_back({lhsLt(view.a), rhsRt(view.a)});        // W(a <| a) = a |> a
  rel.push_back({lhsRt(view.b), rhsLt(view.bhat)});     // W(bh |> b) = bh <| b
  rel.push_back({lhsRt(view.bhat), rhsRt(view.bhat)});  // W(bh |> bh) = a |> bh
  rel.push_back({lhsLt(view.b), rhsLt(view.b)});        // W(b <| a) = b <| b
  rel.push_back({lhsRt(view.ahat), rhsRt(view.ahat)});  // W(bh |> ah) = a |> ah
  rel.push_back({lhsLt(view.ahat), rhsLt(view.ahat)});  // W(ah <| a) = ah <| b
  std::vector<double> out;
  for (auto& [lhs, rhs] : rel) {
    OperatorSubspace moved = mapSubspace(view.W, lhs);
    auto [ok, res] = moved.equals(rhs);
    if (!ok && res < ks.pol.residual_tol) res = 1.0;  // dimension mismatch
    out.push_back(res);
  }
  return out;
}

/// Pentagon residual |W12 W13 W23 - W23 W12| on the chain triple built from
/// the view's own flavors.
inline double pentagonResidual(KacSystem& ks, const SystemView& view) {
  std::string na = anchorNameOf(ks, view.a);
  std::string nbh = anchorNameOf(ks, view.bhat);
  SpacePtr s1 = ks.bank.tripleChain(nbh, na, nbh, na);
  Flavored w12 = liftToLegs(ks.bank, s1, view.W, 12);
  Flavored w23b = liftToLegs(ks.bank, w12.dst, view.W, 23);
  Flavored right = w23b * w12;

  Flavored w23a = liftToLegs(ks.bank, s1, view.W, 23);
  Flavored w13 = liftToLegs(ks.bank, w23a.dst, view.W, 13);
  Flavored w12b = liftToLegs(ks.bank, w13.dst, view.W, 12);
  Flavored left = w12b * w13 * w23a;
  if (left.dst->signature != right.dst->signature)
    throw FlavorError("pentagon: routes land in different spaces");
  return opNorm(CMat(left.m - right.m));
}

/// Regularity: [<a|_1 W |a>_2] = [a a*].
inline double regularityResidual(KacSystem& ks, const SystemView& view) {
  std::vector<Flavored> kets = legKets(ks.bank, view.W.src, {1}, view.a);
  std::vector<Flavored> bras = legKets(ks.bank, view.W.dst, {0}, view.a);
  std::vector<CMat> gens;
  for (const Flavored& b : bras)
    for (const Flavored& k : kets) gens.push_back((b.adjoint() * view.W * k).m);
  OperatorSubspace lhs = OperatorSubspace::span(ks.g.nArrows(), ks.g.nArrows(), gens, ks.pol);
  OperatorSubspace rhs = view.a.space.product(view.a.space.adjointSpace());
  auto [ok, res] = lhs.equals(rhs);
  if (!ok && res < ks.pol.residual_tol) res = 1.0;
  return res;
}

inline OperatorSubspace adUSubspace(const KacSystem& ks, const OperatorSubspace& s) {
  std::vector<CMat> gens;
  for (const CMat& b : s.basis()) gens.push_back(ks.U * b * ks.U);
  return OperatorSubspace::span(s.rows(), s.cols(), gens, ks.pol);
}

}  // namespace gkac
