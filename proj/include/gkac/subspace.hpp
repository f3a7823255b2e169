#pragma once

#include <algorithm>
#include <optional>
#include <utility>

#include "gkac/core.hpp"

// Closed-linear-span calculus for spaces of complex matrices of one fixed
// shape, carried out in the Hilbert-Schmidt geometry. In finite dimensions
// norm closure is automatic, so every bracket [.] becomes a numerical span
// whose rank is decided by TolerancePolicy::rank_cutoff.
namespace gkac {

class OperatorSubspace {
 public:
  OperatorSubspace() = default;

  static OperatorSubspace zero(Index rows, Index cols,
                               TolerancePolicy pol = {}) {
    OperatorSubspace s;
    s.rows_ = rows;
    s.cols_ = cols;
    s.pol_ = pol;
    return s;
  }

  /// Orthonormal span of an arbitrary generator list (may be empty).
  static OperatorSubspace span(Index rows, Index cols,
                               const std::vector<CMat>& generators,
                               TolerancePolicy pol = {});

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index dim() const { return static_cast<Index>(basis_.size()); }
  const std::vector<CMat>& basis() const { return basis_; }
  const TolerancePolicy& policy() const { return pol_; }

  /// Orthogonal projection onto the span.
  CMat project(const CMat& m) const {
    checkShape(m);
    CMat p = CMat::Zero(rows_, cols_);
    for (const CMat& b : basis_) p += hsInner(b, m) * b;
    return p;
  }

  /// residual = |m - P(m)| / max(1, |m|); flag iff residual < residual_tol.
  std::pair<bool, double> contains(const CMat& m) const {
    checkShape(m);
    double res = hsNorm(m - project(m)) / std::max(1.0, hsNorm(m));
    return {res < pol_.residual_tol, res};
  }

  /// Equality as subspaces: equal dimensions and mutual containment of
  /// bases; the residual is the worst projection residual either way.
  std::pair<bool, double> equals(const OperatorSubspace& other) const {
    checkShape(other);
    double worst = 0.0;
    for (const CMat& b : basis_) worst = std::max(worst, other.contains(b).second);
    for (const CMat& b : other.basis_) worst = std::max(worst, contains(b).second);
    bool ok = dim() == other.dim() && worst < pol_.residual_tol;
    return {ok, worst};
  }

  OperatorSubspace adjointSpace() const {
    std::vector<CMat> gens;
    gens.reserve(basis_.size());
    for (const CMat& b : basis_) gens.push_back(b.adjoint());
    return span(cols_, rows_, gens, pol_);
  }

  OperatorSubspace sum(const OperatorSubspace& other) const {
    checkShape(other);
    std::vector<CMat> gens = basis_;
    gens.insert(gens.end(), other.basis_.begin(), other.basis_.end());
    return span(rows_, cols_, gens, pol_);
  }

  OperatorSubspace intersect(const OperatorSubspace& other) const;

  /// [S T] = orthonormal span of pairwise products.
  OperatorSubspace product(const OperatorSubspace& other) const {
    if (cols_ != other.rows_)
      throw ShapeError("span_product: inner shapes differ");
    std::vector<CMat> gens;
    gens.reserve(basis_.size() * other.basis_.size());
    for (const CMat& s : basis_)
      for (const CMat& t : other.basis_) gens.push_back(s * t);
    return span(rows_, other.cols_, gens, pol_);
  }

  /// Commutant of the span inside the full matrix algebra.
  OperatorSubspace commutant() const;

  /// flag iff closed under products and adjoints within residual_tol.
  std::pair<bool, double> isAlgebra() const {
    if (rows_ != cols_) throw ShapeError("is_algebra: space is not square");
    double worst = 0.0;
    for (const CMat& s : basis_)
      for (const CMat& t : basis_)
        worst = std::max(worst, contains(s * t).second);
    worst = std::max(worst, equals(adjointSpace()).second);
    return {worst < pol_.residual_tol, worst};
  }

  /// Unital closure: span together with the identity.
  OperatorSubspace unitalClosure() const {
    if (rows_ != cols_) throw ShapeError("unitalClosure: space is not square");
    std::vector<CMat> gens = basis_;
    gens.push_back(identityLike(rows_));
    return span(rows_, cols_, gens, pol_);
  }

 private:
  void checkShape(const CMat& m) const {
    if (m.rows() != rows_ || m.cols() != cols_)
      throw ShapeError("OperatorSubspace: shape mismatch");
  }
  void checkShape(const OperatorSubspace& s) const {
    if (s.rows_ != rows_ || s.cols_ != cols_)
      throw ShapeError("OperatorSubspace: shape mismatch");
  }

  Index rows_ = 0, cols_ = 0;
  std::vector<CMat> basis_;
  TolerancePolicy pol_;
};

namespace detail {

/// Everything in this library lives in orthonormal-basis coordinates, so
/// matrices are O(1)-scaled; a largest singular value below this floor means
/// the matrix is numerically zero, not a structure at a tiny scale.
constexpr double kZeroFloor = 1e-12;

/// Right-nullspace basis of a complex matrix, rank decided at rank_cutoff
/// (relative, largest singular value; values exactly at the cutoff count as
/// kept, i.e. as part of the row space).
inline std::vector<CVec> nullspace(const CMat& m, double rank_cutoff) {
  if (m.rows() == 0 || m.cols() == 0) {
    std::vector<CVec> out;
    for (Index j = 0; j < m.cols(); ++j) {
      CVec e = CVec::Zero(m.cols());
      e(j) = 1.0;
      out.push_back(e);
    }
    return out;
  }
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  Index rank = 0;
  if (smax > kZeroFloor) {
    for (Index i = 0; i < sv.size(); ++i)
      if (sv(i) >= rank_cutoff * smax) ++rank;
  }
  std::vector<CVec> out;
  for (Index j = rank; j < m.cols(); ++j) out.push_back(svd.matrixV().col(j));
  return out;
}

}  // namespace detail

inline OperatorSubspace OperatorSubspace::span(Index rows, Index cols,
                                               const std::vector<CMat>& generators,
                                               TolerancePolicy pol) {
  pol.validate();
  OperatorSubspace s = zero(rows, cols, pol);
  if (generators.empty()) return s;
  CMat stacked(static_cast<Index>(generators.size()), rows * cols);
  for (std::size_t i = 0; i < generators.size(); ++i) {
    const CMat& g = generators[i];
    if (g.rows() != rows || g.cols() != cols)
      throw ShapeError("orthonormalize: generator shape mismatch");
    if (!allFinite(g)) throw Error("orthonormalize: non-finite generator entry");
    stacked.row(static_cast<Index>(i)) = vectorize(g).transpose();
  }
  Eigen::JacobiSVD<CMat> svd(stacked, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  if (smax <= detail::kZeroFloor) return s;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) >= pol.rank_cutoff * smax)
      s.basis_.push_back(unvectorize(svd.matrixV().col(i).conjugate(), rows, cols));
  }
  return s;
}

inline OperatorSubspace OperatorSubspace::intersect(const OperatorSubspace& other) const {
  checkShape(other);
  if (dim() == 0 || other.dim() == 0) return zero(rows_, cols_, pol_);
  CMat m(rows_ * cols_, dim() + other.dim());
  for (Index j = 0; j < dim(); ++j) m.col(j) = vectorize(basis_[j]);
  for (Index j = 0; j < other.dim(); ++j)
    m.col(dim() + j) = -vectorize(other.basis_[j]);
  std::vector<CVec> null = detail::nullspace(m, pol_.rank_cutoff);
  std::vector<CMat> gens;
  for (const CVec& v : null) {
    CVec inS = CVec::Zero(rows_ * cols_);
    for (Index j = 0; j < dim(); ++j) inS += v(j) * vectorize(basis_[j]);
    gens.push_back(unvectorize(inS, rows_, cols_));
  }
  return span(rows_, cols_, gens, pol_);
}

inline OperatorSubspace OperatorSubspace::commutant() const {
  if (rows_ != cols_) throw ShapeError("commutant: space is not square");
  const Index n = rows_;
  if (dim() == 0) {
    std::vector<CMat> gens;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        CMat e = CMat::Zero(n, n);
        e(i, j) = 1.0;
        gens.push_back(e);
      }
    return span(n, n, gens, pol_);
  }
  // vec(TS - ST) = (kron(S^T, I) - kron(I, S)) vec(T), column-major.
  CMat k(dim() * n * n, n * n);
  for (Index b = 0; b < dim(); ++b) {
    const CMat& s = basis_[b];
    CMat block(n * n, n * n);
    for (Index c2 = 0; c2 < n; ++c2)
      for (Index r2 = 0; r2 < n; ++r2)
        for (Index c1 = 0; c1 < n; ++c1)
          for (Index r1 = 0; r1 < n; ++r1) {
            Complex v = 0.0;
            if (r1 == r2) v += s(c2, c1);          // coefficient of (T S)(r1,c1)
            if (c1 == c2) v -= s(r1, r2);          // coefficient of (S T)(r1,c1)
            block(c1 * n + r1, c2 * n + r2) = v;
          }
    k.block(b * n * n, 0, n * n, n * n) = block;
  }
  std::vector<CVec> null = detail::nullspace(k, pol_.rank_cutoff);
  std::vector<CMat> gens;
  gens.reserve(null.size());
  for (const CVec& v : null) gens.push_back(unvectorize(v, n, n));
  return span(n, n, gens, pol_);
}

/// One membership constraint on an unknown matrix T of a fixed shape:
/// left * T * right (or left * T^* * right when conjugate) must lie in target.
struct MembershipConstraint {
  CMat left;
  CMat right;
  OperatorSubspace target;
  bool conjugate = false;
};

/// Solves for the space of all T satisfying every constraint. T is treated
/// as a real vector of dimension 2*rows*cols (conjugate-linear constraints
/// force realification); the result is re-packaged as a complex subspace
/// after a closure-under-multiplication-by-i check.
inline OperatorSubspace solveMembership(Index rows, Index cols,
                                        const std::vector<MembershipConstraint>& constraints,
                                        TolerancePolicy pol = {}) {
  pol.validate();
  const Index nc = rows * cols;
  std::vector<RMat> blocks;
  Index totalRows = 0;
  for (const MembershipConstraint& con : constraints) {
    const Index tr = con.conjugate ? cols : rows;
    const Index tc = con.conjugate ? rows : cols;
    if (con.left.cols() != tr || con.right.rows() != tc)
      throw ShapeError("solve_membership_constraints: factor shapes inconsistent");
    if (con.target.rows() != con.left.rows() || con.target.cols() != con.right.cols())
      throw ShapeError("solve_membership_constraints: target shape inconsistent");
    const Index outSize = con.left.rows() * con.right.cols();
    // Complex map T |-> vec(L T R) resp. vec(L T^* R) on the real unit basis.
    CMat cmap(outSize, nc);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) {
        CMat unit = CMat::Zero(rows, cols);
        unit(i, j) = 1.0;
        CMat image = con.conjugate ? CMat(con.left * unit.adjoint() * con.right)
                                   : CMat(con.left * unit * con.right);
        cmap.col(j * rows + i) = vectorize(image);
      }
    // Subtract the projection onto the target span.
    for (Index k = 0; k < nc; ++k) {
      CMat img = unvectorize(cmap.col(k), con.left.rows(), con.right.cols());
      cmap.col(k) = vectorize(CMat(img - con.target.project(img)));
    }
    // Realified block: for the conjugate case the map is x+iy |-> A(x-iy).
    RMat re = cmap.real();
    RMat im = cmap.imag();
    RMat block(2 * outSize, 2 * nc);
    double sgn = con.conjugate ? -1.0 : 1.0;
    block << re, -sgn * im, im, sgn * re;
    blocks.push_back(std::move(block));
    totalRows += 2 * outSize;
  }
  std::vector<CMat> gens;
  if (blocks.empty()) {
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) {
        CMat unit = CMat::Zero(rows, cols);
        unit(i, j) = 1.0;
        gens.push_back(unit);
      }
    return OperatorSubspace::span(rows, cols, gens, pol);
  }
  RMat stacked(totalRows, 2 * nc);
  Index at = 0;
  for (const RMat& b : blocks) {
    stacked.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  // For tall stacks reduce to the square R factor first; its singular values
  // coincide with those of the stack.
  if (totalRows > 3 * 2 * nc && totalRows > 2048) {
    Eigen::HouseholderQR<RMat> qr(stacked);
    RMat r = qr.matrixQR().topRows(std::min(totalRows, 2 * nc));
    stacked = r.triangularView<Eigen::Upper>();
  }
  Eigen::JacobiSVD<RMat> svd(stacked, Eigen::ComputeFullV);
  const RVec& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  Index rank = 0;
  if (smax > detail::kZeroFloor) {
    for (Index i = 0; i < sv.size(); ++i)
      if (sv(i) >= pol.rank_cutoff * smax) ++rank;
  }
  std::vector<RVec> realBasis;
  for (Index j = rank; j < 2 * nc; ++j) realBasis.push_back(svd.matrixV().col(j));
  if (realBasis.empty()) return OperatorSubspace::zero(rows, cols, pol);
  // Closure under multiplication by i: J[x;y] = [-y;x] must fix the space.
  RMat rb(2 * nc, static_cast<Index>(realBasis.size()));
  for (std::size_t j = 0; j < realBasis.size(); ++j) rb.col(static_cast<Index>(j)) = realBasis[j];
  for (const RVec& v : realBasis) {
    RVec jv(2 * nc);
    jv.head(nc) = -v.tail(nc);
    jv.tail(nc) = v.head(nc);
    RVec coeff = rb.transpose() * jv;
    double res = (jv - rb * coeff).norm();
    if (res >= pol.residual_tol)
      throw Error("solve_membership_constraints: solution set is not complex-linear");
  }
  for (const RVec& v : realBasis) {
    CVec cv(nc);
    for (Index k = 0; k < nc; ++k) cv(k) = Complex(v(k), v(nc + k));
    gens.push_back(unvectorize(cv, rows, cols));
  }
  return OperatorSubspace::span(rows, cols, gens, pol);
}

}  // namespace gkac
