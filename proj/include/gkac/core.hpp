#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Core scalar/matrix aliases and the tolerance policy shared by every module.
namespace gkac {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(what) {}
};

struct FlavorError : Error {
  explicit FlavorError(const std::string& what) : Error(what) {}
};

/// Numerical policy: rank decisions are relative to the largest singular
/// value, identity checks are absolute residuals. A singular value exactly
/// at the cutoff is kept.
struct TolerancePolicy {
  double rank_cutoff = 1e-9;
  double residual_tol = 1e-8;

  void validate() const {
    if (!(rank_cutoff > 0.0 && rank_cutoff < 1.0))
      throw Error("TolerancePolicy: rank_cutoff must lie in (0,1)");
    if (!(residual_tol > 0.0))
      throw Error("TolerancePolicy: residual_tol must be positive");
  }
};

inline bool allFinite(const CMat& m) { return m.allFinite(); }

/// Hilbert-Schmidt inner product <X,Y> = trace(X^* Y).
inline Complex hsInner(const CMat& x, const CMat& y) {
  return (x.conjugate().cwiseProduct(y)).sum();
}

inline double hsNorm(const CMat& x) { return x.norm(); }

/// Spectral norm via SVD; the residual measure for operator identities.
inline double opNorm(const CMat& m) {
  if (m.size() == 0) return 0.0;
  return m.jacobiSvd().singularValues()(0);
}

inline CVec vectorize(const CMat& m) {
  return Eigen::Map<const CVec>(m.data(), m.size());
}

inline CMat unvectorize(const CVec& v, Index rows, Index cols) {
  return Eigen::Map<const CMat>(v.data(), rows, cols);
}

inline CMat identityLike(Index n) { return CMat::Identity(n, n); }

/// FNV-1a over bytes; used for content digests in reports.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

/// Scientific notation with six significant digits; the canonical rendering
/// of residuals and thresholds in machine reports.
inline std::string sci6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.5e", v);
  return std::string(buf);
}

}  // namespace gkac
