#pragma once

#include "gkac/kac.hpp"

// The full axiom battery over a Kac system: every record is a named residual
// with a stable anchor. Structural failures (flavor mismatches caused by a
// corrupted system) are reported as failing records, not crashes.
namespace gkac {

namespace detail {
template <typename F>
inline void addChecked(std::vector<CheckRecord>& out, const std::string& name, double tol, F&& f) {
  double r;
  try {
    r = f();
  } catch (const Error&) {
    r = 2.0;  // structural failure: the identity cannot even be assembled
  }
  out.push_back(makeRecord(name, r, tol));
}

inline double subspaceEqResidual(const OperatorSubspace& a, const OperatorSubspace& b,
                                 double tol) {
  auto [ok, res] = a.equals(b);
  if (!ok && res < tol) return 1.0;  // dimensions differ
  return res;
}
}  // namespace detail

struct BatteryResult {
  std::vector<CheckRecord> records;
  std::map<std::string, Index> dims;
  Legs legsV, legsVcheck, legsVhat;
  bool legsComputed = false;
};

/// Kac-condition residuals: the cube form, the rearranged form, and the two
/// rotated cube forms; all four must agree in pass/fail.
inline std::vector<double> kacConditionResiduals(KacSystem& ks) {
  Flavored u = ks.uOp();
  std::vector<double> out;
  {  // (Sigma U2 V)^3 = 1 on the composable-pair space
    Flavored u2 = liftToSlot(ks.bank, ks.V.dst, u, 1);
    Flavored z = flip(ks.bank, u2.dst) * u2 * ks.V;
    Flavored z3 = z * z * z;
    out.push_back(opNorm(CMat(z3.m - identityLike(z3.src->dim()))));
  }
  {  // Vhat V Vcheck = U1 Sigma
    Flavored lhs = ks.Vhat * ks.V * ks.Vcheck;
    Flavored s = flip(ks.bank, ks.Vcheck.src);
    Flavored u1 = liftToSlot(ks.bank, s.dst, u, 0);
    Flavored rhs = u1 * s;
    if (lhs.dst->signature != rhs.dst->signature)
      throw FlavorError("kac-vvv: sides land in different spaces");
    out.push_back(opNorm(CMat(lhs.m - rhs.m)));
  }
  {  // (U2 V Sigma)^3 = 1 on the (r,s) space
    Flavored s = flip(ks.bank, ks.bank.pair("r", "s"));
    Flavored u2 = liftToSlot(ks.bank, ks.V.dst, u, 1);
    Flavored z = u2 * ks.V * s;
    Flavored z3 = z * z * z;
    out.push_back(opNorm(CMat(z3.m - identityLike(z3.src->dim()))));
  }
  {  // (V Sigma U2)^3 = 1 on the range-pair space
    Flavored u2 = liftToSlot(ks.bank, ks.V.dst, u, 1);
    Flavored s = flip(ks.bank, u2.dst);
    Flavored z = ks.V * s * u2;
    Flavored z3 = z * z * z;
    out.push_back(opNorm(CMat(z3.m - identityLike(z3.src->dim()))));
  }
  return out;
}

/// Commutation-condition residuals in all four formulations of the lemma
/// defining weak systems: (a) lifted diagrams, (b)/(c) intertwining forms,
/// (d) plain commutation of the leg algebra with its U-conjugate.
struct WeakKacResiduals {
  double rightCommute = 0.0, leftCommute = 0.0;
  double rightIntertwine = 0.0, leftIntertwine = 0.0;
  double rightDiagram = 0.0, leftDiagram = 0.0;
};

inline WeakKacResiduals weakKacResiduals(KacSystem& ks, const Legs& legs) {
  WeakKacResiduals out;
  // (d): Ahat vs Ad_U(Ahat), A vs Ad_U(A).
  for (const CMat& x : legs.Ahat.basis())
    for (const CMat& y : legs.Ahat.basis()) {
      CMat ay = ks.U * y * ks.U;
      out.rightCommute = std::max(out.rightCommute, opNorm(CMat(x * ay - ay * x)));
    }
  for (const CMat& x : legs.A.basis())
    for (const CMat& y : legs.A.basis()) {
      CMat ay = ks.U * y * ks.U;
      out.leftCommute = std::max(out.leftCommute, opNorm(CMat(x * ay - ay * x)));
    }
  // (c): (Ad_U(ahat) x 1)V = V(Ad_U(ahat) x 1); (1 x Ad_U(a))V = V(1 x Ad_U(a)).
  for (const CMat& y : legs.Ahat.basis()) {
    Flavored w(CMat(ks.U * y * ks.U), ks.bank.arrow(), ks.bank.arrow());
    Flavored lSrc = liftToSlot(ks.bank, ks.V.src, w, 0);
    Flavored lDst = liftToSlot(ks.bank, ks.V.dst, w, 0);
    out.rightIntertwine =
        std::max(out.rightIntertwine, opNorm(CMat((lDst * ks.V).m - (ks.V * lSrc).m)));
  }
  for (const CMat& z : legs.A.basis()) {
    Flavored w(CMat(ks.U * z * ks.U), ks.bank.arrow(), ks.bank.arrow());
    Flavored lSrc = liftToSlot(ks.bank, ks.V.src, w, 1);
    Flavored lDst = liftToSlot(ks.bank, ks.V.dst, w, 1);
    out.leftIntertwine =
        std::max(out.leftIntertwine, opNorm(CMat((lDst * ks.V).m - (ks.V * lSrc).m)));
  }
  // (a): Vhat12 V23 = V23 Vhat12 and V12 Vcheck23 = Vcheck23 V12.
  {
    SpacePtr s = ks.bank.tripleChain("r", "r", "s", "r");
    Flavored h12 = liftToLegs(ks.bank, s, ks.Vhat, 12);
    Flavored v23b = liftToLegs(ks.bank, h12.dst, ks.V, 23);
    Flavored v23a = liftToLegs(ks.bank, s, ks.V, 23);
    Flavored h12b = liftToLegs(ks.bank, v23a.dst, ks.Vhat, 12);
    out.rightDiagram = opNorm(CMat((v23b * h12).m - (h12b * v23a).m));
  }
  {
    SpacePtr s = ks.bank.tripleChain("s", "r", "s", "s");
    Flavored c23 = liftToLegs(ks.bank, s, ks.Vcheck, 23);
    Flavored v12b = liftToLegs(ks.bank, c23.dst, ks.V, 12);
    Flavored v12 = liftToLegs(ks.bank, s, ks.V, 12);
    Flavored c23b = liftToLegs(ks.bank, v12.dst, ks.Vcheck, 23);
    out.leftDiagram = opNorm(CMat((v12b * c23).m - (c23b * v12).m));
  }
  return out;
}

/// Coassociativity on generators: for Dhat,
/// V12* w23 V12 = V23* w13 V23 with w = Dhat(y); for D,
/// V12 w13 V12* = V23 w12 V23* with w = D(z).
inline double coassocResidualRight(KacSystem& ks, const Legs& legs) {
  double worst = 0.0;
  SpacePtr t0 = ks.bank.tripleChain("s", "r", "s", "r");
  Flavored v12 = liftToLegs(ks.bank, t0, ks.V, 12);
  Flavored v23 = liftToLegs(ks.bank, t0, ks.V, 23);
  for (const Flavored& w : legs.deltaHat) {
    Flavored w23 = liftToLegs(ks.bank, v12.dst, w, 23);
    Flavored lhs = v12.adjoint() * w23 * v12;
    Flavored w13 = liftToLegs(ks.bank, v23.dst, w, 13);
    Flavored rhs = v23.adjoint() * w13 * v23;
    worst = std::max(worst, opNorm(CMat(lhs.m - rhs.m)));
  }
  return worst;
}

inline double coassocResidualLeft(KacSystem& ks, const Legs& legs) {
  double worst = 0.0;
  SpacePtr s3 = ks.bank.tripleChain("r", "r", "r", "r");
  Flavored v12adj = liftToLegs(ks.bank, s3, ks.V.adjoint(), 12);
  Flavored v23adj = liftToLegs(ks.bank, s3, ks.V.adjoint(), 23);
  for (const Flavored& w : legs.delta) {
    Flavored w13 = liftToLegs(ks.bank, v12adj.dst, w, 13);
    Flavored lhs = v12adj.adjoint() * w13 * v12adj;
    Flavored w12 = liftToLegs(ks.bank, v23adj.dst, w, 12);
    Flavored rhs = v23adj.adjoint() * w12 * v23adj;
    worst = std::max(worst, opNorm(CMat(lhs.m - rhs.m)));
  }
  return worst;
}

/// The eight leg identities relating the legs and comultiplications of
/// Vcheck and Vhat to those of V.
inline std::vector<double> balancedLegsResiduals(KacSystem& ks, const Legs& lv, const Legs& lc,
                                                 const Legs& lh) {
  std::vector<double> out;
  double tol = ks.pol.residual_tol;
  Flavored u = ks.uOp();
  // 1: Ahat(Vcheck) = Ad_U(A(V)).
  out.push_back(detail::subspaceEqResidual(lc.Ahat, adUSubspace(ks, lv.A), tol));
  // 2: Dhat_{Vcheck}(U z U) = Ad_{UxU}(D_V(z)).
  {
    double worst = 0.0;
    Flavored u2 = liftToSlot(ks.bank, ks.Vcheck.src, u, 1);
    Flavored u1 = liftToSlot(ks.bank, u2.dst, u, 0);
    Flavored win = u1 * u2;  // (s,s) -> (r,r)
    for (const CMat& z : lv.A.basis()) {
      CMat w = ks.U * z * ks.U;
      Flavored lhs = comultiplyRight(ks, ks.Vcheck, w);
      Flavored rhs = win.adjoint() * comultiplyLeft(ks, ks.V, z) * win;
      worst = std::max(worst, opNorm(CMat(lhs.m - rhs.m)));
    }
    out.push_back(worst);
  }
  // 3: A(Vcheck) = Ahat(V).
  out.push_back(detail::subspaceEqResidual(lc.A, lv.Ahat, tol));
  // 4: D_{Vcheck} = Dhat_V on Ahat(V).
  {
    double worst = 0.0;
    for (const CMat& y : lv.Ahat.basis()) {
      Flavored lhs = comultiplyLeft(ks, ks.Vcheck, y);
      Flavored rhs = comultiplyRight(ks, ks.V, y);
      worst = std::max(worst, opNorm(CMat(lhs.m - rhs.m)));
    }
    out.push_back(worst);
  }
  // 5: A(Vhat) = Ad_U(Ahat(V)).
  out.push_back(detail::subspaceEqResidual(lh.A, adUSubspace(ks, lv.Ahat), tol));
  // 6: D_{Vhat}(U y U) = Ad_{UxU}(Dhat_V(y)).
  {
    double worst = 0.0;
    Flavored u1 = liftToSlot(ks.bank, ks.Vhat.dst, u, 0);
    Flavored u2 = liftToSlot(ks.bank, u1.dst, u, 1);
    Flavored win = u2 * u1;  // (r,s) -> (s,r)
    for (const CMat& y : lv.Ahat.basis()) {
      CMat w = ks.U * y * ks.U;
      Flavored lhs = comultiplyLeft(ks, ks.Vhat, w);
      Flavored rhs = win.adjoint() * comultiplyRight(ks, ks.V, y) * win;
      worst = std::max(worst, opNorm(CMat(lhs.m - rhs.m)));
    }
    out.push_back(worst);
  }
  // 7: Ahat(Vhat) = A(V).
  out.push_back(detail::subspaceEqResidual(lh.Ahat, lv.A, tol));
  // 8: Dhat_{Vhat} = D_V on A(V).
  {
    double worst = 0.0;
    for (const CMat& z : lv.A.basis()) {
      Flavored lhs = comultiplyRight(ks, ks.Vhat, z);
      Flavored rhs = comultiplyLeft(ks, ks.V, z);
      worst = std::max(worst, opNorm(CMat(lhs.m - rhs.m)));
    }
    out.push_back(worst);
  }
  return out;
}

/// [A(V) Ahat(V)] = [ahat ahat*] and the auxiliary identity
/// [V |a>_2 Ahat] = [|b>_2 Ahat].
inline std::pair<double, double> kacCompactResiduals(KacSystem& ks, const Legs& legs) {
  double tol = ks.pol.residual_tol;
  OperatorSubspace lhs = legs.A.product(legs.Ahat);
  OperatorSubspace rhs = ks.alphahat.space.product(ks.alphahat.space.adjointSpace());
  double r1 = detail::subspaceEqResidual(lhs, rhs, tol);

  std::vector<CMat> g1, g2;
  std::vector<Flavored> ketsA = legKets(ks.bank, ks.V.src, {1}, ks.alpha);
  std::vector<Flavored> ketsB = legKets(ks.bank, ks.V.dst, {1}, ks.beta);
  for (const Flavored& k : ketsA)
    for (const CMat& a : legs.Ahat.basis()) g1.push_back((ks.V * k).m * a);
  for (const Flavored& k : ketsB)
    for (const CMat& a : legs.Ahat.basis()) g2.push_back(k.m * a);
  OperatorSubspace s1 =
      OperatorSubspace::span(ks.V.dst->dim(), ks.g.nArrows(), g1, ks.pol);
  OperatorSubspace s2 =
      OperatorSubspace::span(ks.V.dst->dim(), ks.g.nArrows(), g2, ks.pol);
  double r2 = detail::subspaceEqResidual(s1, s2, tol);
  return {r1, r2};
}

/// Hopf-side absorption and module identities for one leg algebra.
inline double absorptionResidual(KacSystem& ks, const OperatorSubspace& alg,
                                 const Factorization& f1, const Factorization& f2) {
  double tol = ks.pol.residual_tol;
  double worst = 0.0;
  auto rhoSpan = [&](const Factorization& f) {
    return OperatorSubspace::span(ks.g.nArrows(), ks.g.nArrows(),
                                  std::vector<CMat>(f.rho.begin(), f.rho.end()), ks.pol);
  };
  OperatorSubspace r1 = rhoSpan(f1), r2 = rhoSpan(f2);
  worst = std::max(worst, detail::subspaceEqResidual(alg.product(alg), alg, tol));
  worst = std::max(worst, detail::subspaceEqResidual(alg.product(r1), alg, tol));
  worst = std::max(worst, detail::subspaceEqResidual(r1.product(alg), alg, tol));
  worst = std::max(worst, detail::subspaceEqResidual(alg.product(r2), alg, tol));
  worst = std::max(worst, detail::subspaceEqResidual(r2.product(alg), alg, tol));
  return worst;
}

inline double moduleResidual(const OperatorSubspace& alg, const Factorization& f) {
  double worst = 0.0;
  for (const CMat& a : alg.basis())
    for (const CMat& x : f.space.basis()) {
      worst = std::max(worst, f.space.contains(a * x).second);
      worst = std::max(worst, f.space.contains(a.adjoint() * x).second);
    }
  return worst;
}

/// Entries of the structural maps must be exactly zero or positive real
/// (permutation structure); meaningful under counting Haar.
inline double permStructureResidual(KacSystem& ks) {
  double worst = 0.0;
  auto scan = [&](const CMat& m) {
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) {
        Complex v = m(i, j);
        worst = std::max(worst, std::abs(v.imag()));
        if (v.real() < 0.0) worst = std::max(worst, -v.real());
      }
  };
  scan(ks.V.m);
  scan(ks.U);
  scan(flip(ks.bank, ks.bank.pair("s", "r")).m);
  return worst;
}

/// The full kac-check battery.
inline BatteryResult runKacBattery(KacSystem& ks, double tol) {
  BatteryResult out;
  auto& rec = out.records;
  using detail::addChecked;

  addChecked(rec, "unitary-v", tol, [&] { return ks.V.unitarityDefect(); });
  addChecked(rec, "unitary-u", tol,
             [&] { return opNorm(CMat(ks.U.adjoint() * ks.U - identityLike(ks.g.nArrows()))); });
  addChecked(rec, "unitary-vcheck", tol, [&] { return ks.Vcheck.unitarityDefect(); });
  addChecked(rec, "unitary-vhat", tol, [&] { return ks.Vhat.unitarityDefect(); });
  addChecked(rec, "unitary-vop", tol, [&] { return ks.Vop.unitarityDefect(); });
  addChecked(rec, "u-selfadjoint", tol, [&] { return opNorm(CMat(ks.U - ks.U.adjoint())); });
  addChecked(rec, "u-squared", tol,
             [&] { return opNorm(CMat(ks.U * ks.U - identityLike(ks.g.nArrows()))); });
  addChecked(rec, "u-maps-alpha", tol, [&] {
    return detail::subspaceEqResidual(mapSubspace(ks.uOp(), ks.alpha.space), ks.alphahat.space,
                                      ks.pol.residual_tol);
  });
  addChecked(rec, "u-maps-beta", tol, [&] {
    return detail::subspaceEqResidual(mapSubspace(ks.uOp(), ks.beta.space), ks.betahat.space,
                                      ks.pol.residual_tol);
  });

  const std::vector<std::pair<std::string, std::pair<const Factorization*, const Factorization*>>>
      pairs = {{"compat-alpha-beta", {&ks.alpha, &ks.beta}},
               {"compat-alpha-alphahat", {&ks.alpha, &ks.alphahat}},
               {"compat-alpha-betahat", {&ks.alpha, &ks.betahat}},
               {"compat-beta-alphahat", {&ks.beta, &ks.alphahat}},
               {"compat-beta-betahat", {&ks.beta, &ks.betahat}},
               {"compat-alphahat-betahat", {&ks.alphahat, &ks.betahat}}};
  for (auto& [name, fp] : pairs)
    addChecked(rec, name, tol, [&] { return checkCompatible(*fp.first, *fp.second).worst(); });

  addChecked(rec, "fact-axioms-alpha", tol,
             [&] { return validateFactorization(ks.alpha, ks.base).worst(); });
  addChecked(rec, "fact-axioms-beta", tol,
             [&] { return validateFactorization(ks.beta, ks.base).worst(); });
  addChecked(rec, "fact-axioms-alphahat", tol,
             [&] { return validateFactorization(ks.alphahat, ks.base).worst(); });
  addChecked(rec, "fact-axioms-betahat", tol,
             [&] { return validateFactorization(ks.betahat, ks.base).worst(); });

  SystemView vv = primaryView(ks), vc = predualView(ks), vh = dualView(ks);
  auto addIntertwine = [&](const std::string& stem, const SystemView& view) {
    std::vector<double> res;
    try {
      res = intertwineResiduals(ks, view);
    } catch (const Error&) {
      res.assign(6, 2.0);
    }
    for (int i = 0; i < 6; ++i)
      rec.push_back(makeRecord(stem + "-" + std::to_string(i + 1), res[i], tol));
  };
  addIntertwine("intertwine-v", vv);
  addIntertwine("intertwine-vcheck", vc);
  addIntertwine("intertwine-vhat", vh);

  addChecked(rec, "pentagon-v", tol, [&] { return pentagonResidual(ks, vv); });
  addChecked(rec, "pentagon-vcheck", tol, [&] { return pentagonResidual(ks, vc); });
  addChecked(rec, "pentagon-vhat", tol, [&] { return pentagonResidual(ks, vh); });

  addChecked(rec, "regular-v", tol, [&] { return regularityResidual(ks, vv); });
  addChecked(rec, "regular-vcheck", tol, [&] { return regularityResidual(ks, vc); });
  addChecked(rec, "regular-vhat", tol, [&] { return regularityResidual(ks, vh); });

  // Legs and everything downstream of them.
  bool legsOk = true;
  try {
    out.legsV = computeLegs(ks, vv);
    out.legsVcheck = computeLegs(ks, vc);
    out.legsVhat = computeLegs(ks, vh);
    out.legsComputed = true;
  } catch (const Error&) {
    legsOk = false;
  }
  if (legsOk) {
    const Legs& lv = out.legsV;
    out.dims["Ahat"] = lv.Ahat.dim();
    out.dims["A"] = lv.A.dim();
    out.dims["alpha"] = ks.alpha.space.dim();
    out.dims["alphahat"] = ks.alphahat.space.dim();
    out.dims["base"] = ks.base.B.dim();

    addChecked(rec, "legs-algebra-ahat", tol, [&] { return lv.Ahat.isAlgebra().second; });
    addChecked(rec, "legs-algebra-a", tol, [&] { return lv.A.isAlgebra().second; });
    addChecked(rec, "legs-absorb-ahat", tol,
               [&] { return absorptionResidual(ks, lv.Ahat, ks.betahat, ks.alpha); });
    addChecked(rec, "legs-absorb-a", tol,
               [&] { return absorptionResidual(ks, lv.A, ks.beta, ks.alpha); });
    addChecked(rec, "legs-module-ahat", tol, [&] { return moduleResidual(lv.Ahat, ks.beta); });
    addChecked(rec, "legs-module-a", tol, [&] { return moduleResidual(lv.A, ks.betahat); });
    addChecked(rec, "legs-halpha-ahat", tol, [&] {
      return detail::subspaceEqResidual(lv.Ahat.product(ks.alphahat.space), ks.alphahat.space,
                                        ks.pol.residual_tol);
    });
    addChecked(rec, "legs-halpha-a", tol, [&] {
      return detail::subspaceEqResidual(lv.A.product(ks.alphahat.space), ks.alphahat.space,
                                        ks.pol.residual_tol);
    });
    addChecked(rec, "coassoc-ahat", tol, [&] { return coassocResidualRight(ks, lv); });
    addChecked(rec, "coassoc-a", tol, [&] { return coassocResidualLeft(ks, lv); });

    WeakKacResiduals wk;
    bool wkOk = true;
    try {
      wk = weakKacResiduals(ks, lv);
    } catch (const Error&) {
      wkOk = false;
    }
    rec.push_back(makeRecord("weak-kac-ahat-commute", wkOk ? wk.rightCommute : 2.0, tol));
    rec.push_back(makeRecord("weak-kac-a-commute", wkOk ? wk.leftCommute : 2.0, tol));
    rec.push_back(makeRecord("weak-kac-ahat-intertwine", wkOk ? wk.rightIntertwine : 2.0, tol));
    rec.push_back(makeRecord("weak-kac-a-intertwine", wkOk ? wk.leftIntertwine : 2.0, tol));
    rec.push_back(makeRecord("weak-kac-ahat-diagram", wkOk ? wk.rightDiagram : 2.0, tol));
    rec.push_back(makeRecord("weak-kac-a-diagram", wkOk ? wk.leftDiagram : 2.0, tol));

    auto addBalanced = [&] {
      std::vector<double> res;
      try {
        res = balancedLegsResiduals(ks, lv, out.legsVcheck, out.legsVhat);
      } catch (const Error&) {
        res.assign(8, 2.0);
      }
      for (int i = 0; i < 8; ++i)
        rec.push_back(makeRecord("balanced-legs-" + std::to_string(i + 1), res[i], tol));
    };
    addBalanced();

    addChecked(rec, "kac-compact", tol, [&] { return kacCompactResiduals(ks, lv).first; });
    addChecked(rec, "kac-aux", tol, [&] { return kacCompactResiduals(ks, lv).second; });
  } else {
    for (const char* name :
         {"legs-algebra-ahat", "legs-algebra-a", "legs-absorb-ahat", "legs-absorb-a",
          "legs-module-ahat", "legs-module-a", "legs-halpha-ahat", "legs-halpha-a",
          "coassoc-ahat", "coassoc-a", "weak-kac-ahat-commute", "weak-kac-a-commute",
          "weak-kac-ahat-intertwine", "weak-kac-a-intertwine", "weak-kac-ahat-diagram",
          "weak-kac-a-diagram", "balanced-legs-1", "balanced-legs-2", "balanced-legs-3",
          "balanced-legs-4", "balanced-legs-5", "balanced-legs-6", "balanced-legs-7",
          "balanced-legs-8", "kac-compact", "kac-aux"})
      rec.push_back(makeRecord(name, 2.0, tol));
  }

  // Kac condition in all four forms plus the agreement meta-check.
  {
    std::vector<double> kc;
    try {
      kc = kacConditionResiduals(ks);
    } catch (const Error&) {
      kc.assign(4, 2.0);
    }
    rec.push_back(makeRecord("kac-cube", kc[0], tol));
    rec.push_back(makeRecord("kac-vvv", kc[1], tol));
    rec.push_back(makeRecord("kac-cube-rot1", kc[2], tol));
    rec.push_back(makeRecord("kac-cube-rot2", kc[3], tol));
    bool first = kc[0] < tol;
    double agree = 0.0;
    for (double r : kc)
      if ((r < tol) != first) agree = 1.0;
    rec.push_back(makeRecord("kac-agreement", agree, 0.5));
  }

  addChecked(rec, "vhat-equals-vop", tol, [&] {
    if (ks.Vhat.src->signature != ks.Vop.src->signature ||
        ks.Vhat.dst->signature != ks.Vop.dst->signature)
      throw FlavorError("vhat-equals-vop: flavors differ");
    return opNorm(CMat(ks.Vhat.m - ks.Vop.m));
  });

  addChecked(rec, "vcheck-iterate", tol, [&] {
    // (Vcheck)check = Ad_{UxU}(V).
    Flavored vcc = buildDerived(ks, predualView(ks)).Vcheck;
    Flavored u = ks.uOp();
    Flavored u1in = liftToSlot(ks.bank, vcc.src, u, 0);
    Flavored u2in = liftToSlot(ks.bank, u1in.dst, u, 1);
    Flavored win = u2in * u1in;
    Flavored u1out = liftToSlot(ks.bank, ks.V.dst, u, 0);
    Flavored u2out = liftToSlot(ks.bank, u1out.dst, u, 1);
    Flavored rhs = (u2out * u1out) * ks.V * win;
    if (rhs.dst->signature != vcc.dst->signature || rhs.src->signature != vcc.src->signature)
      throw FlavorError("vcheck-iterate: flavors differ");
    return opNorm(CMat(vcc.m - rhs.m));
  });

  addChecked(rec, "op-recode", tol, [&] {
    // (Vop)check = (Vhat)op.
    Flavored lhs = buildDerived(ks, oppositeView(ks)).Vcheck;
    Flavored s1 = flip(ks.bank, ks.Vhat.dst);
    Flavored s2 = flip(ks.bank, ks.Vhat.src);
    Flavored rhs = s2.adjoint() * ks.Vhat.adjoint() * s1.adjoint();
    if (rhs.dst->signature != lhs.dst->signature || rhs.src->signature != lhs.src->signature)
      throw FlavorError("op-recode: flavors differ");
    return opNorm(CMat(lhs.m - rhs.m));
  });

  addChecked(rec, "pentagon-vop-pairing", 1e-12, [&] {
    return std::abs(pentagonResidual(ks, vv) - pentagonResidual(ks, oppositeView(ks)));
  });
  addChecked(rec, "pentagon-aduu-pairing", 1e-12, [&] {
    Flavored u = ks.uOp();
    Flavored u1in = liftToSlot(ks.bank, ks.bank.pair("r", "s"), u, 0);
    Flavored u2in = liftToSlot(ks.bank, u1in.dst, u, 1);
    Flavored u1out = liftToSlot(ks.bank, ks.V.dst, u, 0);
    Flavored u2out = liftToSlot(ks.bank, u1out.dst, u, 1);
    Flavored aduu = (u2out * u1out) * ks.V * (u2in * u1in);
    SystemView iterated{"aduu", ks.alphahat, ks.alpha, ks.betahat, ks.beta, aduu};
    return std::abs(pentagonResidual(ks, iterated) - pentagonResidual(ks, vv));
  });

  // Permutation structure is exact under counting Haar.
  bool counting = (ks.qm.haar.weight.array() == 1.0).all();
  if (counting) addChecked(rec, "perm-structure", tol, [&] { return permStructureResidual(ks); });

  return out;
}

}  // namespace gkac
