#pragma once

#include <array>
#include <map>
#include <memory>
#include <sstream>

#include "gkac/groupoid.hpp"
#include "gkac/subspace.hpp"

// Concrete relative tensor products: fibered pair/triple spaces over the
// arrow set (and over opaque carrier slots), with the structural maps that
// live on them -- flips, slot swaps, and leg-indexed operator lifts.
//
// Every space carries an orthonormal basis e_t = delta_t / sqrt(w(t)) indexed
// by its points; all matrices in this header are written in those bases. The
// point mass of a tuple is w(t) = prod_i slotweight(t_i) / prod_e mu(u_e),
// one mu-divisor per fiber constraint, which reproduces the groupoid measures
// nu^2 on composable pairs and extends them to all condition flavors.
namespace gkac {

/// One tensor slot: a finite measured basis together with its unit-valued
/// anchor maps ("r"/"s" for the arrow slot, custom names for carriers).
struct Slot {
  std::string name;
  Index dim = 0;
  RVec weight;
  std::map<std::string, std::vector<int>> anchors;

  const std::vector<int>& anchor(const std::string& a) const {
    auto it = anchors.find(a);
    if (it == anchors.end()) throw Error("slot " + name + ": unknown anchor " + a);
    return it->second;
  }
};
using SlotPtr = std::shared_ptr<const Slot>;

/// A fiber condition between two slots: anchorA(x_slotA) = anchorB(x_slotB).
struct EdgeSpec {
  int slotA;
  std::string anchorA;
  int slotB;
  std::string anchorB;
};

using Point = std::array<int, 4>;

class FiberedSpace {
 public:
  std::vector<SlotPtr> slots;
  std::vector<EdgeSpec> edges;
  std::vector<Point> pts;
  RVec weight;
  std::string signature;

  int arity() const { return static_cast<int>(slots.size()); }
  Index dim() const { return static_cast<Index>(pts.size()); }

  int find(const Point& p) const {
    auto it = index_.find(p);
    return it == index_.end() ? -1 : it->second;
  }

  void buildIndex() {
    index_.clear();
    for (std::size_t i = 0; i < pts.size(); ++i) index_[pts[i]] = static_cast<int>(i);
  }

 private:
  std::map<Point, int> index_;
};
using SpacePtr = std::shared_ptr<const FiberedSpace>;

/// A matrix together with the spaces it maps between; compositions are
/// rejected unless the flavors agree. This is the guard against silently
/// composing maps between different fibered spaces of equal dimension.
struct Flavored {
  CMat m;
  SpacePtr src;
  SpacePtr dst;

  Flavored() = default;
  Flavored(CMat mat, SpacePtr s, SpacePtr d) : m(std::move(mat)), src(std::move(s)), dst(std::move(d)) {
    if (m.rows() != dst->dim() || m.cols() != src->dim())
      throw ShapeError("Flavored: matrix shape does not match spaces");
  }

  Flavored operator*(const Flavored& rhs) const {
    if (rhs.dst->signature != src->signature)
      throw FlavorError("Flavored composition: flavor mismatch between " + src->signature +
                        " and " + rhs.dst->signature);
    return Flavored(m * rhs.m, rhs.src, dst);
  }
  Flavored adjoint() const { return Flavored(m.adjoint(), dst, src); }
  double unitarityDefect() const {
    double a = opNorm(CMat(m.adjoint() * m - identityLike(src->dim())));
    double b = opNorm(CMat(m * m.adjoint() - identityLike(dst->dim())));
    return std::max(a, b);
  }
};

inline Flavored operator*(Complex c, const Flavored& f) { return Flavored(c * f.m, f.src, f.dst); }

namespace detail {
inline std::string doubleBytes(double d) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}
}  // namespace detail

/// Builds and caches fibered spaces over a fixed groupoid-with-measure
/// session. Two constructions yield the same SpacePtr exactly when they
/// define the same measured point set.
class SpaceBank {
 public:
  SpaceBank() = default;
  SpaceBank(const FiniteGroupoid* g, const QuasiInvariantMeasure* qm) : g_(g), qm_(qm) {
    auto slot = std::make_shared<Slot>();
    slot->name = "G";
    slot->dim = g->nArrows();
    slot->weight = qm->nu;
    slot->anchors["r"] = std::vector<int>(g->range.begin(), g->range.end());
    slot->anchors["s"] = std::vector<int>(g->source.begin(), g->source.end());
    arrowSlot_ = slot;
  }

  const FiniteGroupoid& groupoid() const { return *g_; }
  const QuasiInvariantMeasure& measure() const { return *qm_; }
  SlotPtr arrowSlot() const { return arrowSlot_; }

  /// The space H itself (one arrow slot, no conditions).
  SpacePtr arrow() { return fromEdges({arrowSlot_}, {}); }

  /// A pair space over two arrow slots with condition a1(x) = a2(y);
  /// a1, a2 from {"r","s"}; e.g. pair("s","r") is the composable-pair space.
  SpacePtr pair(const std::string& a1, const std::string& a2) {
    return fromEdges({arrowSlot_, arrowSlot_}, {{0, a1, 1, a2}});
  }

  /// A chain triple over arrow slots: conditions a1(x)=a2(y), b1(y)=b2(z).
  SpacePtr tripleChain(const std::string& a1, const std::string& a2, const std::string& b1,
                       const std::string& b2) {
    return fromEdges({arrowSlot_, arrowSlot_, arrowSlot_}, {{0, a1, 1, a2}, {1, b1, 2, b2}});
  }

  /// Interns a space given by an explicit measured point set.
  SpacePtr fromPoints(const std::vector<SlotPtr>& slots, std::vector<Point> pts,
                      std::vector<double> weights) {
    if (pts.size() != weights.size()) throw Error("SpaceBank: point/weight count mismatch");
    std::vector<std::size_t> order(pts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pts[a] < pts[b]; });
    auto sp = std::make_shared<FiberedSpace>();
    sp->slots = slots;
    sp->pts.reserve(pts.size());
    sp->weight.resize(static_cast<Index>(pts.size()));
    for (std::size_t k = 0; k < order.size(); ++k) {
      sp->pts.push_back(pts[order[k]]);
      sp->weight(static_cast<Index>(k)) = weights[order[k]];
    }
    sp->buildIndex();
    sp->signature = makeSignature(*sp);
    auto it = cache_.find(sp->signature);
    if (it != cache_.end()) return it->second;
    cache_[sp->signature] = sp;
    return sp;
  }

  SpacePtr fromEdges(const std::vector<SlotPtr>& slots, const std::vector<EdgeSpec>& edges) {
    if (slots.empty() || slots.size() > 4) throw Error("SpaceBank: arity must be 1..4");
    auto sp = std::make_shared<FiberedSpace>();
    sp->slots = slots;
    sp->edges = edges;
    for (const EdgeSpec& e : edges) {
      if (e.slotA < 0 || e.slotB < 0 || e.slotA >= static_cast<int>(slots.size()) ||
          e.slotB >= static_cast<int>(slots.size()) || e.slotA == e.slotB)
        throw Error("SpaceBank: bad edge slots");
      slots[e.slotA]->anchor(e.anchorA);
      slots[e.slotB]->anchor(e.anchorB);
    }
    const int arity = static_cast<int>(slots.size());
    Point p{-1, -1, -1, -1};
    std::vector<Point> pts;
    std::vector<double> w;
    enumerate(slots, edges, arity, 0, p, pts, w);
    sp->pts = std::move(pts);
    sp->weight = Eigen::Map<const RVec>(w.data(), static_cast<Index>(w.size()));
    sp->buildIndex();
    sp->signature = makeSignature(*sp);
    auto it = cache_.find(sp->signature);
    if (it != cache_.end()) return it->second;
    cache_[sp->signature] = sp;
    return sp;
  }

 private:
  void enumerate(const std::vector<SlotPtr>& slots, const std::vector<EdgeSpec>& edges, int arity,
                 int at, Point& p, std::vector<Point>& pts, std::vector<double>& w) {
    if (at == arity) {
      double mass = 1.0;
      for (int i = 0; i < arity; ++i) mass *= slots[i]->weight(p[i]);
      for (const EdgeSpec& e : edges) {
        int u = slots[e.slotA]->anchor(e.anchorA)[p[e.slotA]];
        mass /= qm_->mu(u);
      }
      pts.push_back(p);
      w.push_back(mass);
      return;
    }
    for (int c = 0; c < slots[at]->dim; ++c) {
      p[at] = c;
      bool ok = true;
      for (const EdgeSpec& e : edges) {
        int hi = std::max(e.slotA, e.slotB);
        if (hi != at) continue;  // decide each edge once both endpoints are set
        if (std::min(e.slotA, e.slotB) > at) continue;
        int ua = slots[e.slotA]->anchor(e.anchorA)[p[e.slotA]];
        int ub = slots[e.slotB]->anchor(e.anchorB)[p[e.slotB]];
        if (ua != ub) {
          ok = false;
          break;
        }
      }
      if (ok) enumerate(slots, edges, arity, at + 1, p, pts, w);
    }
    p[at] = -1;
  }

  static std::string makeSignature(const FiberedSpace& sp) {
    std::ostringstream os;
    for (const auto& s : sp.slots) os << s->name << "#" << s->dim << "|";
    os << ";";
    for (std::size_t i = 0; i < sp.pts.size(); ++i) {
      for (int k = 0; k < sp.arity(); ++k) os << sp.pts[i][k] << ",";
      os << "=" << detail::doubleBytes(sp.weight(static_cast<Index>(i))) << ";";
    }
    return "sp:" + hex64(fnv1a(os.str()));
  }

  const FiniteGroupoid* g_ = nullptr;
  const QuasiInvariantMeasure* qm_ = nullptr;
  SlotPtr arrowSlot_;
  std::map<std::string, SpacePtr> cache_;
};

/// Slot swap as a unitary: pure permutation of the orthonormal basis. The
/// flip map Sigma on a pair space is swapSlots(space, 0, 1).
inline Flavored swapSlots(SpaceBank& bank, const SpacePtr& space, int i, int j) {
  if (i == j || i < 0 || j < 0 || i >= space->arity() || j >= space->arity())
    throw Error("swapSlots: bad slot indices");
  std::vector<SlotPtr> slots = space->slots;
  std::swap(slots[i], slots[j]);
  std::vector<Point> pts;
  std::vector<double> ws;
  for (Index k = 0; k < space->dim(); ++k) {
    Point p = space->pts[k];
    std::swap(p[i], p[j]);
    pts.push_back(p);
    ws.push_back(space->weight(k));  // the weight formula is symmetric in the slots
  }
  SpacePtr dst = bank.fromPoints(slots, std::move(pts), std::move(ws));
  CMat m = CMat::Zero(dst->dim(), space->dim());
  for (Index k = 0; k < space->dim(); ++k) {
    Point p = space->pts[k];
    std::swap(p[i], p[j]);
    int t = dst->find(p);
    if (t < 0) throw FlavorError("swapSlots: swapped point missing in target");
    m(t, k) = 1.0;
  }
  return Flavored(std::move(m), space, dst);
}

inline Flavored flip(SpaceBank& bank, const SpacePtr& pairSpace) {
  if (pairSpace->arity() != 2) throw Error("flip: arity-2 space required");
  return swapSlots(bank, pairSpace, 0, 1);
}

namespace detail {
/// delta-coordinate entry of an e-coordinate matrix between measured spaces.
inline double scaleDelta(double wSrc, double wDst) { return std::sqrt(wSrc / wDst); }
}  // namespace detail

/// Lifts an operator X acting on a sub-collection of slots to a bigger
/// space, acting as the identity on the remaining slots. `slotsSrc` names
/// the slots of bigSrc occupied by X's source (in X's slot order), likewise
/// `slotsDst`. Rejects the lift when a nonzero coefficient of X would move a
/// point of bigSrc outside bigDst or vice versa; that is exactly the
/// representation-compatibility condition for leg lifts.
inline Flavored liftToSlots(const SpacePtr& bigSrc, const SpacePtr& bigDst, const Flavored& x,
                            const std::vector<int>& slotsSrc, const std::vector<int>& slotsDst,
                            double coeffTol = 1e-13) {
  const FiberedSpace& sub = *x.src;
  const FiberedSpace& subDst = *x.dst;
  if (static_cast<int>(slotsSrc.size()) != sub.arity() ||
      static_cast<int>(slotsDst.size()) != subDst.arity())
    throw Error("liftToSlots: slot lists do not match operand arity");
  if (bigSrc->arity() - sub.arity() != bigDst->arity() - subDst.arity())
    throw Error("liftToSlots: rest arities differ");

  // delta-coordinate matrix of X.
  CMat xd = x.m;
  for (Index r = 0; r < xd.rows(); ++r)
    for (Index c = 0; c < xd.cols(); ++c)
      if (xd(r, c) != 0.0) xd(r, c) *= detail::scaleDelta(sub.weight(c), subDst.weight(r));

  std::vector<int> restSrc, restDst;
  for (int k = 0; k < bigSrc->arity(); ++k)
    if (std::find(slotsSrc.begin(), slotsSrc.end(), k) == slotsSrc.end()) restSrc.push_back(k);
  for (int k = 0; k < bigDst->arity(); ++k)
    if (std::find(slotsDst.begin(), slotsDst.end(), k) == slotsDst.end()) restDst.push_back(k);
  if (restSrc.size() != restDst.size()) throw Error("liftToSlots: rest slot mismatch");

  auto subPointOf = [](const Point& p, const std::vector<int>& sl) {
    Point q{-1, -1, -1, -1};
    for (std::size_t k = 0; k < sl.size(); ++k) q[k] = p[sl[k]];
    return q;
  };

  CMat m = CMat::Zero(bigDst->dim(), bigSrc->dim());
  for (Index t = 0; t < bigSrc->dim(); ++t) {
    const Point& p = bigSrc->pts[t];
    int a = sub.find(subPointOf(p, slotsSrc));
    if (a < 0)
      throw FlavorError("liftToSlots: source point does not restrict to the operand's space");
    for (Index b = 0; b < subDst.dim(); ++b) {
      if (std::abs(xd(b, a)) <= coeffTol) continue;
      Point q{-1, -1, -1, -1};
      for (std::size_t k = 0; k < slotsDst.size(); ++k) q[slotsDst[k]] = subDst.pts[b][k];
      for (std::size_t k = 0; k < restDst.size(); ++k) q[restDst[k]] = p[restSrc[k]];
      int tDst = bigDst->find(q);
      if (tDst < 0)
        throw FlavorError("liftToSlots: operand moves a point outside the target space "
                          "(condition mismatch)");
      m(tDst, t) += xd(b, a) * detail::scaleDelta(1.0 / bigSrc->weight(t), 1.0 / bigDst->weight(tDst));
    }
  }
  // Reverse direction: every nonzero coefficient must also pull back.
  for (Index t = 0; t < bigDst->dim(); ++t) {
    const Point& p = bigDst->pts[t];
    int b = subDst.find(subPointOf(p, slotsDst));
    if (b < 0)
      throw FlavorError("liftToSlots: target point does not restrict to the operand's space");
    for (Index a = 0; a < sub.dim(); ++a) {
      if (std::abs(xd(b, a)) <= coeffTol) continue;
      Point q{-1, -1, -1, -1};
      for (std::size_t k = 0; k < slotsSrc.size(); ++k) q[slotsSrc[k]] = sub.pts[a][k];
      for (std::size_t k = 0; k < restSrc.size(); ++k) q[restSrc[k]] = p[restDst[k]];
      if (bigSrc->find(q) < 0)
        throw FlavorError("liftToSlots: operand pulls a point outside the source space "
                          "(condition mismatch)");
    }
  }
  return Flavored(std::move(m), bigSrc, bigDst);
}

/// Computes the target space of a slot lift by transporting the measured
/// point set of `bigSrc` along the support of `op`. For endomorphisms the
/// target is the source itself; otherwise (the unitary structural maps) the
/// image support determines the target, and inconsistent transported weights
/// signal a condition mismatch.
inline SpacePtr liftTarget(SpaceBank& bank, const SpacePtr& bigSrc, const Flavored& op,
                           const std::vector<int>& slotsOp, double coeffTol = 1e-13) {
  const FiberedSpace& sub = *op.src;
  const FiberedSpace& subDst = *op.dst;
  if (static_cast<int>(slotsOp.size()) != sub.arity() || sub.arity() != subDst.arity())
    throw Error("liftTarget: slot list does not match operand arity");
  CMat xd = op.m;
  for (Index r = 0; r < xd.rows(); ++r)
    for (Index c = 0; c < xd.cols(); ++c)
      if (xd(r, c) != 0.0) xd(r, c) *= detail::scaleDelta(sub.weight(c), subDst.weight(r));

  std::vector<int> rest;
  for (int k = 0; k < bigSrc->arity(); ++k)
    if (std::find(slotsOp.begin(), slotsOp.end(), k) == slotsOp.end()) rest.push_back(k);

  std::vector<SlotPtr> slots = bigSrc->slots;
  for (std::size_t k = 0; k < slotsOp.size(); ++k) slots[slotsOp[k]] = subDst.slots[k];

  // An endomorphism whose support stays inside the source lifts in place;
  // otherwise the image support determines the target (the structural maps
  // that move anchors are unitary, so the image covers the target).
  if (op.src->signature == op.dst->signature) {
    bool stays = true;
    for (Index t = 0; t < bigSrc->dim() && stays; ++t) {
      const Point& p = bigSrc->pts[t];
      Point sq{-1, -1, -1, -1};
      for (std::size_t k = 0; k < slotsOp.size(); ++k) sq[k] = p[slotsOp[k]];
      int a = sub.find(sq);
      if (a < 0) throw FlavorError("liftTarget: source point does not restrict to operand space");
      for (Index b = 0; b < subDst.dim() && stays; ++b) {
        if (std::abs(xd(b, a)) <= coeffTol) continue;
        Point q{-1, -1, -1, -1};
        for (std::size_t k = 0; k < slotsOp.size(); ++k) q[slotsOp[k]] = subDst.pts[b][k];
        for (int r : rest) q[r] = p[r];
        if (bigSrc->find(q) < 0) stays = false;
      }
    }
    if (stays) return bigSrc;
  }

  std::map<Point, double> out;
  for (Index t = 0; t < bigSrc->dim(); ++t) {
    const Point& p = bigSrc->pts[t];
    Point sq{-1, -1, -1, -1};
    for (std::size_t k = 0; k < slotsOp.size(); ++k) sq[k] = p[slotsOp[k]];
    int a = sub.find(sq);
    if (a < 0) throw FlavorError("liftTarget: source point does not restrict to operand space");
    double restMass = bigSrc->weight(t) / sub.weight(a);
    for (Index b = 0; b < subDst.dim(); ++b) {
      if (std::abs(xd(b, a)) <= coeffTol) continue;
      Point q{-1, -1, -1, -1};
      for (std::size_t k = 0; k < slotsOp.size(); ++k) q[slotsOp[k]] = subDst.pts[b][k];
      for (int r : rest) q[r] = p[r];
      double w = restMass * subDst.weight(b);
      auto it = out.find(q);
      if (it == out.end())
        out[q] = w;
      else if (std::abs(it->second - w) > 1e-12 * std::max(1.0, std::abs(w)))
        throw FlavorError("liftTarget: inconsistent transported weights (condition mismatch)");
    }
  }
  std::vector<Point> pts;
  std::vector<double> ws;
  for (const auto& [p, w] : out) {
    pts.push_back(p);
    ws.push_back(w);
  }
  return bank.fromPoints(slots, std::move(pts), std::move(ws));
}

/// Leg lift on triples per the leg calculus: legs 12, 23 act on adjacent
/// coordinate pairs; leg 13 is built by the flip composition
/// swap23 . (op lifted to 12) . swap23.
inline Flavored liftToLegs(SpaceBank& bank, const SpacePtr& src3, const Flavored& op, int legs) {
  if (src3->arity() != 3) throw Error("lift_to_legs: arity-3 space required");
  switch (legs) {
    case 12: {
      SpacePtr dst3 = liftTarget(bank, src3, op, {0, 1});
      return liftToSlots(src3, dst3, op, {0, 1}, {0, 1});
    }
    case 23: {
      SpacePtr dst3 = liftTarget(bank, src3, op, {1, 2});
      return liftToSlots(src3, dst3, op, {1, 2}, {1, 2});
    }
    case 13: {
      Flavored s1 = swapSlots(bank, src3, 1, 2);
      SpacePtr mid = liftTarget(bank, s1.dst, op, {0, 1});
      Flavored l = liftToSlots(s1.dst, mid, op, {0, 1}, {0, 1});
      Flavored s2 = swapSlots(bank, mid, 1, 2);
      return s2 * l * s1;
    }
    default:
      throw Error("lift_to_legs: legs must be 12, 23 or 13");
  }
}

/// Lift to one slot of an arbitrary-arity space (used for (1 (x) y)-style
/// amplifications on pairs and for carrier legs).
inline Flavored liftToSlot(SpaceBank& bank, const SpacePtr& bigSrc, const Flavored& op, int slot) {
  SpacePtr dst = liftTarget(bank, bigSrc, op, {slot});
  return liftToSlots(bigSrc, dst, op, {slot}, {slot});
}

/// Lift to a contiguous block of slots.
inline Flavored liftToBlock(SpaceBank& bank, const SpacePtr& bigSrc, const Flavored& op,
                            const std::vector<int>& slots) {
  SpacePtr dst = liftTarget(bank, bigSrc, op, slots);
  return liftToSlots(bigSrc, dst, op, slots, slots);
}

}  // namespace gkac
