#pragma once

#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gkac/core.hpp"

// Finite groupoids with left Haar systems and quasi-invariant measures,
// including the modular cocycle D = dnu/dnu^{-1}.
namespace gkac {

struct ValidationIssue {
  std::string axiom;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool pass() const { return issues.empty(); }
  std::string summary() const {
    if (pass()) return "ok";
    std::ostringstream os;
    for (const auto& i : issues) os << i.axiom << ": " << i.detail << "; ";
    return os.str();
  }
};

/// A finite groupoid: ordered units and arrows, range/source maps, a partial
/// composition defined exactly on composable pairs, inversion, and the unit
/// embedding. All derived matrix layouts use the declared order.
struct FiniteGroupoid {
  std::vector<std::string> units;
  std::vector<std::string> arrows;
  std::vector<int> source;      // arrow -> unit index (s_G)
  std::vector<int> range;       // arrow -> unit index (r_G)
  Eigen::MatrixXi compose;      // compose(x,y) = arrow index of x*y, or -1
  std::vector<int> inverse;     // arrow -> arrow index
  std::vector<int> unitArrow;   // unit -> its identity arrow

  int nUnits() const { return static_cast<int>(units.size()); }
  int nArrows() const { return static_cast<int>(arrows.size()); }
  bool composable(int x, int y) const { return source[x] == range[y]; }
  int mult(int x, int y) const { return compose(x, y); }

  int arrowIndex(const std::string& id) const {
    for (int i = 0; i < nArrows(); ++i)
      if (arrows[i] == id) return i;
    throw Error("unknown arrow id: " + id);
  }
  int unitIndex(const std::string& id) const {
    for (int i = 0; i < nUnits(); ++i)
      if (units[i] == id) return i;
    throw Error("unknown unit id: " + id);
  }

  std::vector<int> rangeFiber(int u) const {
    std::vector<int> out;
    for (int x = 0; x < nArrows(); ++x)
      if (range[x] == u) out.push_back(x);
    return out;
  }
  std::vector<int> sourceFiber(int u) const {
    std::vector<int> out;
    for (int x = 0; x < nArrows(); ++x)
      if (source[x] == u) out.push_back(x);
    return out;
  }
};

inline ValidationReport validateGroupoid(const FiniteGroupoid& g) {
  ValidationReport rep;
  auto issue = [&](const std::string& axiom, const std::string& detail) {
    rep.issues.push_back({axiom, detail});
  };
  const int n = g.nArrows();
  const int nu = g.nUnits();
  if (static_cast<int>(g.source.size()) != n || static_cast<int>(g.range.size()) != n ||
      static_cast<int>(g.inverse.size()) != n || g.compose.rows() != n ||
      g.compose.cols() != n || static_cast<int>(g.unitArrow.size()) != nu) {
    issue("structure", "field sizes inconsistent");
    return rep;
  }
  for (int x = 0; x < n; ++x) {
    if (g.source[x] < 0 || g.source[x] >= nu || g.range[x] < 0 || g.range[x] >= nu)
      issue("structure", "source/range out of bounds at " + g.arrows[x]);
    if (g.inverse[x] < 0 || g.inverse[x] >= n)
      issue("structure", "inverse out of bounds at " + g.arrows[x]);
  }
  if (!rep.pass()) return rep;

  // Composition defined exactly on composable pairs, with correct range/source.
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      int xy = g.compose(x, y);
      if (g.composable(x, y)) {
        if (xy < 0 || xy >= n) {
          issue("composition", "missing product " + g.arrows[x] + "*" + g.arrows[y]);
          continue;
        }
        if (g.range[xy] != g.range[x])
          issue("range-law", "r(" + g.arrows[x] + g.arrows[y] + ") != r(" + g.arrows[x] + ")");
        if (g.source[xy] != g.source[y])
          issue("source-law", "s(" + g.arrows[x] + g.arrows[y] + ") != s(" + g.arrows[y] + ")");
      } else if (xy != -1) {
        issue("composition", "product defined on non-composable pair " + g.arrows[x] + "," +
                                 g.arrows[y]);
      }
    }

  // Associativity wherever both sides are defined.
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      if (!g.composable(x, y)) continue;
      for (int z = 0; z < n; ++z) {
        if (!g.composable(y, z)) continue;
        int lhs = g.compose(g.compose(x, y), z);
        int rhs = g.compose(x, g.compose(y, z));
        if (lhs != rhs)
          issue("associativity", "(" + g.arrows[x] + g.arrows[y] + ")" + g.arrows[z] + " != " +
                                     g.arrows[x] + "(" + g.arrows[y] + g.arrows[z] + ")");
      }
    }

  // Units are two-sided identities.
  for (int u = 0; u < nu; ++u) {
    int e = g.unitArrow[u];
    if (g.source[e] != u || g.range[e] != u)
      issue("unit", "unit arrow of " + g.units[u] + " not an endo-arrow at its unit");
  }
  for (int x = 0; x < n; ++x) {
    int er = g.unitArrow[g.range[x]];
    int es = g.unitArrow[g.source[x]];
    if (g.compose(er, x) != x) issue("unit", "e_r(x)*x != x at " + g.arrows[x]);
    if (g.compose(x, es) != x) issue("unit", "x*e_s(x) != x at " + g.arrows[x]);
  }

  // Inversion laws: x*x^{-1} = unit at r(x), x^{-1}*x = unit at s(x).
  for (int x = 0; x < n; ++x) {
    int xi = g.inverse[x];
    if (g.source[xi] != g.range[x] || g.range[xi] != g.source[x]) {
      issue("inverse", "inverse of " + g.arrows[x] + " has wrong fibers");
      continue;
    }
    if (g.compose(x, xi) != g.unitArrow[g.range[x]])
      issue("inverse", "x*x^{-1} != unit at r(x) for " + g.arrows[x]);
    if (g.compose(xi, x) != g.unitArrow[g.source[x]])
      issue("inverse", "x^{-1}*x != unit at s(x) for " + g.arrows[x]);
  }
  return rep;
}

namespace detail {
inline void requireValid(const FiniteGroupoid& g, const std::string& who) {
  ValidationReport rep = validateGroupoid(g);
  if (!rep.pass()) throw Error(who + ": invalid groupoid: " + rep.summary());
}
}  // namespace detail

/// A finite group presented by its Cayley table (table(i,j) = index of g_i g_j).
inline FiniteGroupoid makeGroup(const std::vector<std::string>& elements,
                                const Eigen::MatrixXi& table,
                                const std::string& unitName = "pt") {
  const int n = static_cast<int>(elements.size());
  if (table.rows() != n || table.cols() != n) throw Error("makeGroup: table shape");
  // Latin-square check and identity detection.
  int e = -1;
  for (int i = 0; i < n; ++i) {
    std::vector<bool> seenRow(n, false), seenCol(n, false);
    for (int j = 0; j < n; ++j) {
      int r = table(i, j), c = table(j, i);
      if (r < 0 || r >= n || c < 0 || c >= n) throw Error("makeGroup: table entry range");
      if (seenRow[r] || seenCol[c]) throw Error("makeGroup: table is not a Latin square");
      seenRow[r] = seenCol[c] = true;
    }
    bool isId = true;
    for (int j = 0; j < n; ++j)
      if (table(i, j) != j || table(j, i) != j) isId = false;
    if (isId) e = i;
  }
  if (e < 0) throw Error("makeGroup: no identity element in table");
  FiniteGroupoid g;
  g.units = {unitName};
  g.arrows = elements;
  g.source.assign(n, 0);
  g.range.assign(n, 0);
  g.compose = table;
  g.inverse.assign(n, -1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (table(i, j) == e) g.inverse[i] = j;
  g.unitArrow = {e};
  detail::requireValid(g, "makeGroup");
  return g;
}

inline FiniteGroupoid makeCyclicGroup(int n, const std::string& prefix = "g") {
  if (n < 1) throw Error("makeCyclicGroup: order must be positive");
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i));
  Eigen::MatrixXi t(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t(i, j) = (i + j) % n;
  return makeGroup(names, t);
}

/// Pair groupoid on k points: arrows (i,j), s(i,j) = j, r(i,j) = i.
inline FiniteGroupoid makePairGroupoid(int k) {
  if (k < 1) throw Error("makePairGroupoid: point count must be positive");
  FiniteGroupoid g;
  for (int i = 0; i < k; ++i) g.units.push_back("p" + std::to_string(i + 1));
  auto idx = [k](int i, int j) { return i * k + j; };
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      g.arrows.push_back("a" + std::to_string(i + 1) + std::to_string(j + 1));
      g.range.push_back(i);
      g.source.push_back(j);
    }
  const int n = k * k;
  g.compose = Eigen::MatrixXi::Constant(n, n, -1);
  g.inverse.assign(n, -1);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      g.inverse[idx(i, j)] = idx(j, i);
      for (int l = 0; l < k; ++l) g.compose(idx(i, j), idx(j, l)) = idx(i, l);
    }
  for (int i = 0; i < k; ++i) g.unitArrow.push_back(idx(i, i));
  detail::requireValid(g, "makePairGroupoid");
  return g;
}

inline FiniteGroupoid makeDisjointUnion(const FiniteGroupoid& a, const FiniteGroupoid& b,
                                        const std::string& tagA = "L",
                                        const std::string& tagB = "R") {
  FiniteGroupoid g;
  for (const auto& u : a.units) g.units.push_back(tagA + "." + u);
  for (const auto& u : b.units) g.units.push_back(tagB + "." + u);
  for (const auto& x : a.arrows) g.arrows.push_back(tagA + "." + x);
  for (const auto& x : b.arrows) g.arrows.push_back(tagB + "." + x);
  const int na = a.nArrows(), nb = b.nArrows(), ua = a.nUnits();
  g.source = a.source;
  g.range = a.range;
  for (int x = 0; x < nb; ++x) {
    g.source.push_back(b.source[x] + ua);
    g.range.push_back(b.range[x] + ua);
  }
  g.compose = Eigen::MatrixXi::Constant(na + nb, na + nb, -1);
  g.compose.topLeftCorner(na, na) = a.compose;
  for (int x = 0; x < nb; ++x)
    for (int y = 0; y < nb; ++y)
      if (b.compose(x, y) >= 0) g.compose(na + x, na + y) = na + b.compose(x, y);
  g.inverse = a.inverse;
  for (int x = 0; x < nb; ++x) g.inverse.push_back(na + b.inverse[x]);
  g.unitArrow = a.unitArrow;
  for (int u = 0; u < b.nUnits(); ++u) g.unitArrow.push_back(na + b.unitArrow[u]);
  detail::requireValid(g, "makeDisjointUnion");
  return g;
}

/// Bundle of groups: one unit per group, no arrows between units.
inline FiniteGroupoid makeGroupBundle(const std::vector<FiniteGroupoid>& groups) {
  if (groups.empty()) throw Error("makeGroupBundle: empty list");
  for (const auto& h : groups)
    if (h.nUnits() != 1) throw Error("makeGroupBundle: components must be groups");
  FiniteGroupoid g = groups[0];
  for (std::size_t i = 1; i < groups.size(); ++i)
    g = makeDisjointUnion(g, groups[i], "b" + std::to_string(i - 1), "b" + std::to_string(i));
  return g;
}

/// Transformation groupoid of a finite group action: arrows (t, x) with
/// s(t,x) = x, r(t,x) = t.x; (t, t'.x')(t', x') = (t t', x').
/// `action` maps each group element index to a permutation image vector.
inline FiniteGroupoid makeTransformationGroupoid(
    const FiniteGroupoid& group, const std::vector<std::string>& points,
    const std::vector<std::vector<int>>& action) {
  if (group.nUnits() != 1) throw Error("makeTransformationGroupoid: need a group");
  const int m = static_cast<int>(points.size());
  const int n = group.nArrows();
  if (static_cast<int>(action.size()) != n)
    throw Error("makeTransformationGroupoid: action size mismatch");
  for (const auto& perm : action) {
    if (static_cast<int>(perm.size()) != m)
      throw Error("makeTransformationGroupoid: permutation size mismatch");
    std::vector<bool> seen(m, false);
    for (int v : perm) {
      if (v < 0 || v >= m || seen[v])
        throw Error("makeTransformationGroupoid: action is not by permutations");
      seen[v] = true;
    }
  }
  // Homomorphism check: action(t t') = action(t) o action(t').
  for (int t = 0; t < n; ++t)
    for (int t2 = 0; t2 < n; ++t2)
      for (int x = 0; x < m; ++x)
        if (action[group.compose(t, t2)][x] != action[t][action[t2][x]])
          throw Error("makeTransformationGroupoid: action is not a homomorphism");

  FiniteGroupoid g;
  g.units = points;
  auto idx = [m](int t, int x) { return t * m + x; };
  for (int t = 0; t < n; ++t)
    for (int x = 0; x < m; ++x) {
      g.arrows.push_back(group.arrows[t] + "." + points[x]);
      g.source.push_back(x);
      g.range.push_back(action[t][x]);
    }
  const int total = n * m;
  g.compose = Eigen::MatrixXi::Constant(total, total, -1);
  g.inverse.assign(total, -1);
  for (int t = 0; t < n; ++t)
    for (int x = 0; x < m; ++x) {
      g.inverse[idx(t, x)] = idx(group.inverse[t], action[t][x]);
      for (int t2 = 0; t2 < n; ++t2) {
        // (t, y) (t2, x) with y = t2.x
        g.compose(idx(t, action[t2][x]), idx(t2, x)) = idx(group.compose(t, t2), x);
      }
    }
  int e = group.unitArrow[0];
  for (int x = 0; x < m; ++x) g.unitArrow.push_back(idx(e, x));
  detail::requireValid(g, "makeTransformationGroupoid");
  return g;
}

/// Left Haar system: positive weights lambda(x) on range fibers with
/// lambda(xy) = lambda(y) for every composable pair (left invariance);
/// the derived right system is lambda^{-1}(x) = lambda(x^{-1}).
struct HaarSystem {
  RVec weight;     // lambda(x) as a point of G^{r(x)}
  RVec weightInv;  // lambda^{-1}(x) = lambda(x^{-1})

  double maxInvarianceDefect(const FiniteGroupoid& g) const {
    double worst = 0.0;
    for (int x = 0; x < g.nArrows(); ++x)
      for (int y = 0; y < g.nArrows(); ++y)
        if (g.composable(x, y))
          worst = std::max(worst, std::abs(weight(g.mult(x, y)) - weight(y)));
    return worst;
  }
};

inline HaarSystem makeHaar(const FiniteGroupoid& g, const RVec& weights) {
  if (weights.size() != g.nArrows()) throw Error("makeHaar: weight count mismatch");
  for (int x = 0; x < g.nArrows(); ++x)
    if (!(weights(x) > 0.0)) throw Error("makeHaar: weights must be strictly positive");
  HaarSystem h;
  h.weight = weights;
  h.weightInv.resize(g.nArrows());
  for (int x = 0; x < g.nArrows(); ++x) h.weightInv(x) = weights(g.inverse[x]);
  double defect = h.maxInvarianceDefect(g);
  if (defect > 1e-12)
    throw Error("makeHaar: weights are not left invariant (defect " + std::to_string(defect) +
                ")");
  return h;
}

inline HaarSystem countingHaar(const FiniteGroupoid& g) {
  return makeHaar(g, RVec::Ones(g.nArrows()));
}

/// Quasi-invariant measure data: mu on units, the induced nu and nu^{-1} on
/// arrows, and the modular cocycle D = nu/nu^{-1}.
struct QuasiInvariantMeasure {
  RVec mu;      // unit -> positive mass
  RVec nu;      // nu(x) = mu(r(x)) lambda(x)
  RVec nuInv;   // nu^{-1}(x) = nu(x^{-1})
  RVec D;       // D(x) = nu(x)/nu^{-1}(x)
  HaarSystem haar;

  double maxInvolutionDefect(const FiniteGroupoid& g) const {
    double worst = 0.0;
    for (int x = 0; x < g.nArrows(); ++x)
      worst = std::max(worst, std::abs(D(g.inverse[x]) - 1.0 / D(x)));
    return worst;
  }
  /// sup over composable pairs of |D(x) D(y) D(y^{-1} x^{-1}) - 1|.
  double maxCocycleDefect(const FiniteGroupoid& g) const {
    double worst = 0.0;
    for (int x = 0; x < g.nArrows(); ++x)
      for (int y = 0; y < g.nArrows(); ++y)
        if (g.composable(x, y)) {
          int z = g.inverse[g.mult(x, y)];
          worst = std::max(worst, std::abs(D(x) * D(y) * D(z) - 1.0));
        }
    return worst;
  }
  double totalMass(const FiniteGroupoid&) const { return nu.sum(); }
};

inline QuasiInvariantMeasure makeMeasure(const FiniteGroupoid& g, const HaarSystem& haar,
                                         const RVec& mu) {
  if (mu.size() != g.nUnits()) throw Error("makeMeasure: mu size mismatch");
  for (int u = 0; u < g.nUnits(); ++u)
    if (!(mu(u) > 0.0)) throw Error("makeMeasure: mu must be strictly positive");
  QuasiInvariantMeasure q;
  q.mu = mu;
  q.haar = haar;
  q.nu.resize(g.nArrows());
  for (int x = 0; x < g.nArrows(); ++x) q.nu(x) = mu(g.range[x]) * haar.weight(x);
  q.nuInv.resize(g.nArrows());
  for (int x = 0; x < g.nArrows(); ++x) q.nuInv(x) = q.nu(g.inverse[x]);
  q.D = q.nu.cwiseQuotient(q.nuInv);
  double d1 = q.maxInvolutionDefect(g);
  double d2 = q.maxCocycleDefect(g);
  if (d1 > 1e-10 || d2 > 1e-10)
    throw Error("makeMeasure: cocycle identities violated");
  return q;
}

}  // namespace gkac
