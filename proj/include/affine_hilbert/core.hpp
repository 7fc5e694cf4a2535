#pragma once

// Finite-truncation vectors, index partitions, operator blocks and PSD
// matrix utilities shared by every other module.

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace affine_hilbert {

using Complex = std::complex<double>;
using RVec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;

/// Truncation level n with the disjoint cone/free index sets I and J.
/// Indices are stored 0-based; external formats (JSON/CSV) are 1-based.
struct IndexPartition {
  int n = 0;
  std::vector<int> I;
  std::vector<int> J;

  /// Builds a partition from the cone indices; J is the complement of I.
  static IndexPartition from_cone(int n, std::vector<int> cone) {
    IndexPartition p;
    p.n = n;
    p.I = std::move(cone);
    std::sort(p.I.begin(), p.I.end());
    std::vector<char> in_I(static_cast<std::size_t>(n), 0);
    for (int i : p.I) {
      if (i < 0 || i >= n) throw std::invalid_argument("IndexPartition: index out of range");
      if (in_I[static_cast<std::size_t>(i)]) throw std::invalid_argument("IndexPartition: duplicate index");
      in_I[static_cast<std::size_t>(i)] = 1;
    }
    for (int k = 0; k < n; ++k)
      if (!in_I[static_cast<std::size_t>(k)]) p.J.push_back(k);
    return p;
  }

  static IndexPartition all_cone(int n) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) idx[static_cast<std::size_t>(k)] = k;
    return from_cone(n, std::move(idx));
  }

  static IndexPartition all_free(int n) { return from_cone(n, {}); }
};

namespace detail {
inline void require_indices(const std::vector<int>& K, Eigen::Index n, const char* who) {
  for (int k : K)
    if (k < 0 || k >= n) throw std::invalid_argument(std::string(who) + ": index out of range");
}
}  // namespace detail

/// Coordinate projection pi_K: keeps coordinates in K, zeroes the rest.
template <typename Vec>
Vec project(const Vec& x, const std::vector<int>& K) {
  detail::require_indices(K, x.size(), "project");
  Vec out = Vec::Zero(x.size());
  for (int k : K) out[k] = x[k];
  return out;
}

/// Block P_K * A * P_L embedded back as an n-by-n matrix (zero outside K x L).
inline RMat block(const RMat& A, const std::vector<int>& K, const std::vector<int>& L) {
  if (A.rows() != A.cols()) throw std::invalid_argument("block: matrix must be square");
  detail::require_indices(K, A.rows(), "block");
  detail::require_indices(L, A.cols(), "block");
  RMat out = RMat::Zero(A.rows(), A.cols());
  for (int k : K)
    for (int l : L) out(k, l) = A(k, l);
  return out;
}

/// Plain bilinear pairing sum_k a_k b_k (no conjugation). This is the pairing
/// that appears on every Riccati right-hand side: the second slot is already
/// the conjugate there, and the sesquilinear inner product conjugates its
/// second argument, so the two conjugations cancel.
inline Complex cpair(const CVec& a, const CVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cpair: length mismatch");
  Complex s{0.0, 0.0};
  for (Eigen::Index k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

/// Hermitian inner product sum_k a_k conj(b_k), conjugate-linear in b.
inline Complex hermitian_inner(const CVec& a, const CVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hermitian_inner: length mismatch");
  Complex s{0.0, 0.0};
  for (Eigen::Index k = 0; k < a.size(); ++k) s += a[k] * std::conj(b[k]);
  return s;
}

/// Membership in the transform domain U: Re(u_I) <= tol, |Re(u_J)| <= tol.
inline bool in_U(const CVec& u, const IndexPartition& p, double tol = 0.0) {
  if (u.size() != p.n) throw std::invalid_argument("in_U: length mismatch");
  for (int i : p.I)
    if (u[i].real() > tol) return false;
  for (int j : p.J)
    if (std::abs(u[j].real()) > tol) return false;
  return true;
}

inline double trace(const RMat& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("trace: matrix must be square");
  return A.trace();
}

/// Max-norm of the antisymmetric part.
inline double asymmetry(const RMat& A) {
  return (A - A.transpose()).cwiseAbs().maxCoeff();
}

/// Spectral (operator) norm.
inline double spectral_norm(const RMat& A) {
  if (A.size() == 0) return 0.0;
  return A.jacobiSvd().singularValues()(0);
}

/// Symmetric PSD test: near-symmetry plus min eigenvalue of the symmetric
/// part >= -tol.
inline bool psd_check(const RMat& A, double tol = 1e-10) {
  if (A.rows() != A.cols()) throw std::invalid_argument("psd_check: matrix must be square");
  if (A.size() == 0) return true;
  if (asymmetry(A) > tol) return false;
  Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("psd_check: eigensolver failed");
  return es.eigenvalues().minCoeff() >= -tol;
}

/// Min eigenvalue of the symmetric part (diagnostic residual for reports).
inline double min_eigenvalue(const RMat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("min_eigenvalue: eigensolver failed");
  return es.eigenvalues().minCoeff();
}

/// Symmetric PSD square root by eigendecomposition; negative eigenvalues
/// within tolerance are clamped to zero.
inline RMat psd_sqrt(const RMat& A, double tol = 1e-10) {
  if (A.rows() != A.cols()) throw std::invalid_argument("psd_sqrt: matrix must be square");
  if (A.size() == 0) return A;
  if (!psd_check(A, tol)) throw std::domain_error("psd_sqrt: matrix is not PSD within tolerance");
  Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (A + A.transpose()));
  if (es.info() != Eigen::Success) throw std::runtime_error("psd_sqrt: eigensolver failed");
  RVec d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace affine_hilbert
