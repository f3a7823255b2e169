#pragma once

#include "gkac/base.hpp"

// Leg operators (kets and bras of factorization elements) on fibered spaces,
// and the triangle factorizations they generate on product spaces.
namespace gkac {

/// The arity-1 space of one slot of a product space.
inline SpacePtr slotSpace(SpaceBank& bank, const SpacePtr& space, int slot) {
  return bank.fromEdges({space->slots[slot]}, {});
}

namespace detail {

struct LegStructure {
  std::vector<int> restSlots;
  std::vector<int> subIndexOfPoint;   // space point -> sub-space point index
  std::vector<int> restIndexOfPoint;  // space point -> rest-space point index
  std::vector<int> matchedUnit;       // rest point -> unit
  SpacePtr restSpace;
};

/// Decomposes a fibered space as (sub block) (x)_unit (rest block) along the
/// anchor map of a factorization: validates that the point set is exactly
/// { (a, r) : anchor(a) = u(r) } and that the weights factor accordingly.
inline LegStructure analyzeLeg(SpaceBank& bank, const SpacePtr& space,
                               const std::vector<int>& slotSet, const SpacePtr& subSpace,
                               const std::vector<int>& anchorVec) {
  LegStructure out;
  const RVec& mu = bank.measure().mu;
  for (int k = 0; k < space->arity(); ++k)
    if (std::find(slotSet.begin(), slotSet.end(), k) == slotSet.end()) out.restSlots.push_back(k);

  auto subPoint = [&](const Point& p) {
    Point q{-1, -1, -1, -1};
    for (std::size_t k = 0; k < slotSet.size(); ++k) q[k] = p[slotSet[k]];
    return q;
  };
  auto restPoint = [&](const Point& p) {
    Point q{-1, -1, -1, -1};
    for (std::size_t k = 0; k < out.restSlots.size(); ++k) q[k] = p[out.restSlots[k]];
    return q;
  };

  // Collect rest points, their fibers, and the matched units.
  std::map<Point, std::vector<std::pair<int, int>>> fibers;  // rest -> [(subIdx, ptIdx)]
  out.subIndexOfPoint.assign(space->dim(), -1);
  for (Index t = 0; t < space->dim(); ++t) {
    int a = subSpace->find(subPoint(space->pts[t]));
    if (a < 0)
      throw FlavorError("leg operator: space point does not restrict to the factorization's "
                        "carrier");
    out.subIndexOfPoint[t] = a;
    fibers[restPoint(space->pts[t])].push_back({a, static_cast<int>(t)});
  }

  std::vector<Point> restPts;
  std::vector<double> restWeights;
  out.restIndexOfPoint.assign(space->dim(), -1);
  for (auto& [r, fiber] : fibers) {
    int u = anchorVec[fiber.front().first];
    // The fiber over r must be exactly the anchor fiber of u.
    std::vector<bool> present(subSpace->dim(), false);
    for (auto& [a, t] : fiber) {
      if (anchorVec[a] != u)
        throw FlavorError("leg operator: fiber mixes anchor units (condition mismatch)");
      present[a] = true;
    }
    for (Index a = 0; a < subSpace->dim(); ++a)
      if (anchorVec[a] == u && !present[a])
        throw FlavorError("leg operator: anchor fiber not fully paired (condition mismatch)");
    // Weight factorization w(a,r) = w_sub(a) w_rest(r) / mu(u).
    double wRest = space->weight(fiber.front().second) * mu(u) /
                   subSpace->weight(fiber.front().first);
    for (auto& [a, t] : fiber) {
      double expect = subSpace->weight(a) * wRest / mu(u);
      if (std::abs(space->weight(t) - expect) > 1e-12 * std::max(1.0, expect))
        throw FlavorError("leg operator: weights do not factor (condition mismatch)");
    }
    int rIdx = static_cast<int>(restPts.size());
    restPts.push_back(r);
    restWeights.push_back(wRest);
    out.matchedUnit.push_back(u);
    for (auto& [a, t] : fiber) out.restIndexOfPoint[t] = rIdx;
  }
  std::vector<SlotPtr> restSlotDefs;
  for (int k : out.restSlots) restSlotDefs.push_back(space->slots[k]);
  SpacePtr interned = bank.fromPoints(restSlotDefs, restPts, restWeights);
  // Re-map rest indices into the interned (sorted) order.
  std::vector<int> remap(restPts.size());
  for (std::size_t i = 0; i < restPts.size(); ++i) {
    int j = interned->find(restPts[i]);
    if (j < 0) throw Error("leg operator: internal rest-space interning failure");
    remap[i] = j;
  }
  std::vector<int> matched(interned->dim());
  for (std::size_t i = 0; i < restPts.size(); ++i) matched[remap[i]] = out.matchedUnit[i];
  for (Index t = 0; t < space->dim(); ++t)
    out.restIndexOfPoint[t] = remap[out.restIndexOfPoint[t]];
  out.matchedUnit = std::move(matched);
  out.restSpace = interned;
  return out;
}

}  // namespace detail

/// The ket of a factorization element on a slot block: the isometry-scaled
/// insertion map rest -> space. The defining relation <xi|_l |xi'>_l =
/// rho_other(<xi|xi'>) holds by the weight normalization of the space.
inline Flavored legKet(SpaceBank& bank, const SpacePtr& space, const std::vector<int>& slotSet,
                       const Factorization& f, const CMat& elementE) {
  if (!f.anchored()) throw FlavorError("leg operator: factorization carries no anchor map");
  const SpacePtr& sub = f.carrier;
  if (elementE.rows() != sub->dim() || elementE.cols() != static_cast<Index>(bank.measure().mu.size()))
    throw ShapeError("leg operator: element shape mismatch");
  detail::LegStructure st = detail::analyzeLeg(bank, space, slotSet, sub, f.anchor);
  const RVec& mu = bank.measure().mu;
  // Symbol of the element: g(a) = xi_delta[a, anchor(a)].
  CVec symbol(sub->dim());
  for (Index a = 0; a < sub->dim(); ++a) {
    int u = f.anchor[a];
    symbol(a) = elementE(a, u) * std::sqrt(mu(u) / sub->weight(a));
  }
  CMat m = CMat::Zero(space->dim(), st.restSpace->dim());
  for (Index t = 0; t < space->dim(); ++t) {
    int a = st.subIndexOfPoint[t];
    int r = st.restIndexOfPoint[t];
    if (symbol(a) == 0.0) continue;
    m(t, r) = symbol(a) * std::sqrt(space->weight(t) / st.restSpace->weight(r));
  }
  return Flavored(std::move(m), st.restSpace, space);
}

inline Flavored legBra(SpaceBank& bank, const SpacePtr& space, const std::vector<int>& slotSet,
                       const Factorization& f, const CMat& elementE) {
  return legKet(bank, space, slotSet, f, elementE).adjoint();
}

/// All basis kets of a factorization on a slot block.
inline std::vector<Flavored> legKets(SpaceBank& bank, const SpacePtr& space,
                                     const std::vector<int>& slotSet, const Factorization& f) {
  std::vector<Flavored> out;
  for (const CMat& b : f.space.basis()) out.push_back(legKet(bank, space, slotSet, f, b));
  return out;
}

/// Pair-space conveniences, 1-based leg numbering.
inline Flavored legKetPair(SpaceBank& bank, const SpacePtr& pairSpace, int leg,
                           const Factorization& f, const CMat& elementE) {
  if (pairSpace->arity() != 2) throw Error("legKetPair: arity-2 space required");
  return legKet(bank, pairSpace, {leg - 1}, f, elementE);
}

/// gamma <| f2 := [ |f2>_2 gamma ], a factorization of the product space
/// anchored through the left block; rho is the leg-1 lift of rho_gamma.
inline Factorization triangleLeft(SpaceBank& bank, const CStarBase& base, const SpacePtr& space,
                                  const std::vector<int>& leftSlots,
                                  const std::vector<int>& rightSlots, const Factorization& gamma,
                                  const Factorization& f2, bool revalidate = true) {
  if (!gamma.anchored()) throw FlavorError("triangleLeft: gamma carries no anchor map");
  std::vector<Flavored> kets = legKets(bank, space, rightSlots, f2);
  std::vector<CMat> gens;
  for (const Flavored& k : kets) {
    if (k.src->signature != gamma.carrier->signature)
      throw FlavorError("triangleLeft: gamma does not live on the complementary block");
    for (const CMat& c : gamma.space.basis()) gens.push_back(k.m * c);
  }
  Factorization out;
  out.name = gamma.name + "<|" + f2.name;
  out.carrier = space;
  out.space = OperatorSubspace::span(space->dim(), base.baseDim, gens, gamma.space.policy());
  for (Index u = 0; u < base.baseDim; ++u) {
    Flavored r(gamma.rho[u], gamma.carrier, gamma.carrier);
    out.rho.push_back(liftToSlots(space, space, r, leftSlots, leftSlots).m);
  }
  out.anchor.resize(space->dim());
  detail::LegStructure st = detail::analyzeLeg(bank, space, rightSlots, f2.carrier, f2.anchor);
  for (Index t = 0; t < space->dim(); ++t) {
    // anchor of the product factorization = gamma's anchor on the left part.
    Point q{-1, -1, -1, -1};
    for (std::size_t k = 0; k < leftSlots.size(); ++k) q[k] = space->pts[t][leftSlots[k]];
    int a = gamma.carrier->find(q);
    if (a < 0) throw FlavorError("triangleLeft: left block mismatch");
    out.anchor[t] = gamma.anchor[a];
  }
  if (revalidate) {
    FactorizationReport rep = validateFactorization(out, base);
    if (rep.worst() >= gamma.space.policy().residual_tol)
      throw Error("triangleLeft: factorization axioms fail, residual " + sci6(rep.worst()));
  }
  return out;
}

/// f1 |> delta := [ |f1>_1 delta ], anchored through the right block; rho is
/// the leg-2 lift of rho_delta.
inline Factorization triangleRight(SpaceBank& bank, const CStarBase& base, const SpacePtr& space,
                                   const std::vector<int>& leftSlots,
                                   const std::vector<int>& rightSlots, const Factorization& f1,
                                   const Factorization& delta, bool revalidate = true) {
  if (!delta.anchored()) throw FlavorError("triangleRight: delta carries no anchor map");
  std::vector<Flavored> kets = legKets(bank, space, leftSlots, f1);
  std::vector<CMat> gens;
  for (const Flavored& k : kets) {
    if (k.src->signature != delta.carrier->signature)
      throw FlavorError("triangleRight: delta does not live on the complementary block");
    for (const CMat& c : delta.space.basis()) gens.push_back(k.m * c);
  }
  Factorization out;
  out.name = f1.name + "|>" + delta.name;
  out.carrier = space;
  out.space = OperatorSubspace::span(space->dim(), base.baseDim, gens, delta.space.policy());
  for (Index u = 0; u < base.baseDim; ++u) {
    Flavored r(delta.rho[u], delta.carrier, delta.carrier);
    out.rho.push_back(liftToSlots(space, space, r, rightSlots, rightSlots).m);
  }
  out.anchor.resize(space->dim());
  for (Index t = 0; t < space->dim(); ++t) {
    Point q{-1, -1, -1, -1};
    for (std::size_t k = 0; k < rightSlots.size(); ++k) q[k] = space->pts[t][rightSlots[k]];
    int a = delta.carrier->find(q);
    if (a < 0) throw FlavorError("triangleRight: right block mismatch");
    out.anchor[t] = delta.anchor[a];
  }
  if (revalidate) {
    FactorizationReport rep = validateFactorization(out, base);
    if (rep.worst() >= delta.space.policy().residual_tol)
      throw Error("triangleRight: factorization axioms fail, residual " + sci6(rep.worst()));
  }
  return out;
}

}  // namespace gkac
