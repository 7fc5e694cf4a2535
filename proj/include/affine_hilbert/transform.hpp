#pragma once

// State-space-preserving isomorphism Lambda = Id + D, the transformed
// parameter tuple, block-structure verification of the transformed
// volatility, and the retraction weights defining the admissible
// starting-point subspace.

#include "affine_hilbert/core.hpp"
#include "affine_hilbert/params.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace affine_hilbert {

enum class RetractionRule { Identity, SqrtPower };

struct TransformPack {
  RMat D;
  RMat Lambda;
  RMat LambdaInv;
  AffineParams params_bar;
  std::vector<double> lambda;  // over I, partition order
  std::vector<double> kappa;
  std::vector<double> nu;
  RMat T;  // diagonal retraction, identity off I
};

/// D e_i = -pi_J S(e_i) e_i / lambda_i on cone coordinates with lambda_i > 0,
/// zero elsewhere. ran(D) lies in the free block, which D annihilates.
inline RMat build_D(const AffineParams& p) {
  const int n = p.n();
  RMat D = RMat::Zero(n, n);
  for (int i : p.partition.I) {
    RVec ei = RVec::Zero(n);
    ei[i] = 1.0;
    RVec s = S_op(p, ei) * ei;
    RVec sI = project(s, p.partition.I);
    RVec sJ = project(s, p.partition.J);
    double lam = sI.norm();
    if (lam > 0.0) D.col(i) = -sJ / lam;
  }
  return D;
}

/// Lambda = Id + D with the exact nilpotent inverse Id - D.
inline std::pair<RMat, RMat> build_lambda_op(const RMat& D) {
  if (D.rows() != D.cols()) throw std::invalid_argument("build_lambda_op: D must be square");
  double nil = (D * D).cwiseAbs().maxCoeff();
  if (nil > 1e-13)
    throw std::domain_error("build_lambda_op: D is not nilpotent of order two");
  RMat I = RMat::Identity(D.rows(), D.cols());
  return {I + D, I - D};
}

/// Pushes the tuple through Lambda: drift affinely, volatility by congruence;
/// the basis-image matrices of the transformed state-dependent part are
/// materialized once so later evaluations stay quadratic in n.
inline AffineParams transform_params(const AffineParams& p, const RMat& Lambda,
                                     const RMat& LambdaInv) {
  const int n = p.n();
  AffineParams q = p;
  q.m0 = Lambda * p.m0;
  q.M = Lambda * p.M * LambdaInv;
  q.n0 = Lambda * p.n0 * Lambda.transpose();
  q.nk.assign(static_cast<std::size_t>(n), RMat());
  std::vector<RMat> pushed(static_cast<std::size_t>(n));
  for (int l = 0; l < n; ++l) {
    const RMat& nl = p.n_k(l);
    if (nl.size() != 0) pushed[static_cast<std::size_t>(l)] = Lambda * nl * Lambda.transpose();
  }
  for (int k = 0; k < n; ++k) {
    RMat acc;
    for (int l = 0; l < n; ++l) {
      double w = LambdaInv(l, k);
      if (w == 0.0 || pushed[static_cast<std::size_t>(l)].size() == 0) continue;
      if (acc.size() == 0)
        acc = w * pushed[static_cast<std::size_t>(l)];
      else
        acc += w * pushed[static_cast<std::size_t>(l)];
    }
    q.nk[static_cast<std::size_t>(k)] = std::move(acc);
  }
  return q;
}

struct BlockDiagonalReport {
  double cross_block_residual = 0.0;   // IJ/JI blocks of S_bar(y)
  double free_dependence_residual = 0.0;  // S_bar(y) - S_bar(y_I)
  double diagonal_residual = 0.0;      // II block against lambda_i y_i
  bool pass(double tol) const {
    return cross_block_residual <= tol && free_dependence_residual <= tol &&
           diagonal_residual <= tol;
  }
};

/// Residuals of the transformed volatility structure over a deterministic
/// battery of cone points.
inline BlockDiagonalReport check_block_diagonal(const AffineParams& pbar,
                                                const std::vector<double>& lambda,
                                                int n_points = 32) {
  BlockDiagonalReport rep;
  const auto& I = pbar.partition.I;
  const auto& J = pbar.partition.J;
  const int n = pbar.n();
  for (int pt = 0; pt < n_points; ++pt) {
    RVec y(n);
    for (int k = 0; k < n; ++k) {
      // deterministic quasi-random positives on I, signed values on J
      double v = 0.5 + 0.5 * std::sin(1.7 * (pt + 1) * (k + 2));
      y[k] = v;
    }
    for (int j : J) y[j] = std::sin(2.3 * (pt + 1) * (j + 1));
    RMat S = S_op(pbar, y);
    for (int i : I)
      for (int j : J)
        rep.cross_block_residual = std::max(
            rep.cross_block_residual, std::max(std::abs(S(i, j)), std::abs(S(j, i))));
    RMat SI = S_op(pbar, project(y, I));
    rep.free_dependence_residual =
        std::max(rep.free_dependence_residual, (S - SI).cwiseAbs().maxCoeff());
    for (std::size_t a = 0; a < I.size(); ++a) {
      for (std::size_t b = 0; b < I.size(); ++b) {
        double expect = (a == b) ? lambda[a] * y[I[a]] : 0.0;
        rep.diagonal_residual =
            std::max(rep.diagonal_residual, std::abs(S(I[a], I[b]) - expect));
      }
    }
  }
  return rep;
}

/// Cone-block volatility applied to a noise increment: coordinate i of the
/// result is sqrt(lambda_i y_i) w_i. The caller supplies w already expressed
/// in the reduced orthonormal coordinates.
inline RVec sigma_bar_II_apply(const AffineParams& pbar, const std::vector<double>& lambda,
                               const RVec& y, const RVec& w, double tol = 1e-12) {
  const auto& I = pbar.partition.I;
  if (y.size() != pbar.n() || w.size() != pbar.n())
    throw std::invalid_argument("sigma_bar_II_apply: length mismatch");
  RVec out = RVec::Zero(pbar.n());
  for (std::size_t a = 0; a < I.size(); ++a) {
    double yi = y[I[a]];
    if (yi < -tol) throw std::domain_error("sigma_bar_II_apply: negative cone coordinate");
    out[I[a]] = std::sqrt(lambda[a] * std::max(yi, 0.0)) * w[I[a]];
  }
  return out;
}

/// Retraction weights over I: identity, or the default
/// nu_i = max(sqrt(lambda_i), i^{-1/4}) which keeps lambda_i/nu_i
/// square-summable under the shipped decay rules. The index in the power
/// fallback is the 1-based position within I.
inline std::pair<std::vector<double>, RMat> build_retraction(
    const IndexPartition& partition, const std::vector<double>& lambda, RetractionRule rule) {
  if (lambda.size() != partition.I.size())
    throw std::invalid_argument("build_retraction: lambda size mismatch");
  std::vector<double> nu(lambda.size(), 1.0);
  if (rule == RetractionRule::SqrtPower) {
    for (std::size_t a = 0; a < lambda.size(); ++a)
      nu[a] = std::max(std::sqrt(lambda[a]),
                       std::pow(static_cast<double>(a + 1), -0.25));
  }
  RMat T = RMat::Identity(partition.n, partition.n);
  for (std::size_t a = 0; a < lambda.size(); ++a) T(partition.I[a], partition.I[a]) = nu[a];
  return {nu, T};
}

/// Weighted norm sqrt(sum (x_i/nu_i)^2) over the cone coordinates; finite
/// exactly when x lies in the retracted starting-point subspace.
inline double h0_norm(const IndexPartition& partition, const std::vector<double>& nu,
                      const RVec& x) {
  if (nu.size() != partition.I.size()) throw std::invalid_argument("h0_norm: nu size mismatch");
  double s = 0.0;
  for (std::size_t a = 0; a < partition.I.size(); ++a) {
    double r = x[partition.I[a]] / nu[a];
    s += r * r;
  }
  return std::sqrt(s);
}

/// One-stop construction: D, Lambda, transformed tuple, lambda/kappa and the
/// retraction. finite_I selects the identity retraction (the natural choice
/// when the model is genuinely finite-dimensional).
inline TransformPack build_transform(const AffineParams& p,
                                     RetractionRule rule = RetractionRule::Identity) {
  TransformPack tp;
  tp.D = build_D(p);
  auto [L, Linv] = build_lambda_op(tp.D);
  tp.Lambda = std::move(L);
  tp.LambdaInv = std::move(Linv);
  tp.params_bar = transform_params(p, tp.Lambda, tp.LambdaInv);
  auto [lam, kap] = lambda_kappa(p);
  tp.lambda = std::move(lam);
  tp.kappa = std::move(kap);
  auto [nu, T] = build_retraction(p.partition, tp.lambda, rule);
  tp.nu = std::move(nu);
  tp.T = std::move(T);
  return tp;
}

}  // namespace affine_hilbert
