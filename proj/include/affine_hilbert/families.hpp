#pragma once

// Constructors for the three worked model families: Ornstein-Uhlenbeck
// (pure free block), Cox-Ingersoll-Ross type (pure cone block) and Heston
// type (paired cone/free coordinates).

#include "affine_hilbert/core.hpp"
#include "affine_hilbert/params.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace affine_hilbert {

enum class FamilyKind { OU, CIR, Heston };

/// Sequence-driven family description. All sequences are generated by decay
/// rules so every summability hypothesis has a closed-form tail certificate.
struct FamilySpec {
  FamilyKind family = FamilyKind::CIR;
  int n = 1;        // total dimension (Heston: n = 2 * nI)
  int nI = 1;       // Heston cone size; pairing tau(i) = nI + i
  DecayRule lambda_rule{DecayKind::Power, 1.0, 2.0};   // lambda_i = i^-2
  // one order faster than lambda so the ratio kappa_i / lambda_i is
  // square-summable with a closed-form tail; kappa_i <= lambda_i everywhere
  DecayRule kappa_rule{DecayKind::Power, 0.5, 3.0};
  DecayRule rho_rule{DecayKind::Power, 1.0, 2.0};      // |rho_i| = i^-2 (drift is -rho)
  DecayRule m0_rule{DecayKind::Power, 1.0, 2.0};       // m0_i = i^-2
  DecayRule n0_rule{DecayKind::Power, 1.0, 2.0};       // OU/Heston free-block diag
  DecayRule sigma_w_rule{DecayKind::Power, 1.0, 2.0};  // noise covariance diag
};

namespace detail {

inline TailDecay decay_of(const FamilySpec& s, bool with_kappa) {
  TailDecay d;
  d.lambda_rule = s.lambda_rule;
  if (with_kappa) d.kappa_rule = s.kappa_rule;
  d.rho_rule = s.rho_rule;
  return d;
}

}  // namespace detail

/// Pure cone-block family: independent square-root coordinates with
/// mean-reverting drift.
inline AffineParams make_cir(const FamilySpec& s) {
  if (s.family != FamilyKind::CIR) throw std::invalid_argument("make_cir: wrong family tag");
  if (s.n < 1) throw std::invalid_argument("make_cir: n must be >= 1");
  AffineParams p;
  p.partition = IndexPartition::all_cone(s.n);
  p.m0 = RVec::Zero(s.n);
  p.M = RMat::Zero(s.n, s.n);
  p.n0 = RMat::Zero(s.n, s.n);
  p.nk.assign(static_cast<std::size_t>(s.n), RMat());
  p.sigma_w_diag = RVec::Zero(s.n);
  for (int i = 0; i < s.n; ++i) {
    double lam = s.lambda_rule.eval(i + 1);
    if (lam <= 0.0) throw std::invalid_argument("make_cir: lambda must be positive");
    p.m0[i] = s.m0_rule.eval(i + 1);
    p.M(i, i) = -s.rho_rule.eval(i + 1);
    RMat ni = RMat::Zero(s.n, s.n);
    ni(i, i) = lam;
    p.nk[static_cast<std::size_t>(i)] = std::move(ni);
    p.sigma_w_diag[i] = s.sigma_w_rule.eval(i + 1);
  }
  p.decay = detail::decay_of(s, false);
  return p;
}

/// Paired family: cone coordinate i drives the volatility of both itself and
/// its free partner tau(i) = nI + i; the free block carries an additional
/// constant diagonal volatility.
inline AffineParams make_heston(const FamilySpec& s) {
  if (s.family != FamilyKind::Heston) throw std::invalid_argument("make_heston: wrong family tag");
  if (s.nI < 1) throw std::invalid_argument("make_heston: nI must be >= 1");
  const int n = 2 * s.nI;
  std::vector<int> cone(static_cast<std::size_t>(s.nI));
  for (int i = 0; i < s.nI; ++i) cone[static_cast<std::size_t>(i)] = i;
  AffineParams p;
  p.partition = IndexPartition::from_cone(n, std::move(cone));
  p.m0 = RVec::Zero(n);
  p.M = RMat::Zero(n, n);
  p.n0 = RMat::Zero(n, n);
  p.nk.assign(static_cast<std::size_t>(n), RMat());
  p.sigma_w_diag = RVec::Zero(n);
  for (int i = 0; i < s.nI; ++i) {
    int tau = s.nI + i;
    double lam = s.lambda_rule.eval(i + 1);
    double kap = s.kappa_rule.eval(i + 1);
    if (lam <= 0.0) throw std::invalid_argument("make_heston: lambda must be positive");
    if (kap > lam) throw std::invalid_argument("make_heston: kappa exceeds lambda");
    p.m0[i] = s.m0_rule.eval(i + 1);
    p.M(i, i) = -s.rho_rule.eval(i + 1);
    p.M(tau, tau) = -s.rho_rule.eval(i + 1);
    RMat ni = RMat::Zero(n, n);
    ni(i, i) = lam;
    ni(i, tau) = kap;
    ni(tau, i) = kap;
    ni(tau, tau) = lam;
    p.nk[static_cast<std::size_t>(i)] = std::move(ni);
    p.n0(tau, tau) = s.n0_rule.eval(i + 1);
  }
  for (int k = 0; k < n; ++k) p.sigma_w_diag[k] = s.sigma_w_rule.eval(k + 1);
  p.decay = detail::decay_of(s, true);
  return p;
}

/// Pure free-block family: constant volatility, affine drift.
inline AffineParams make_ou(const FamilySpec& s) {
  if (s.family != FamilyKind::OU) throw std::invalid_argument("make_ou: wrong family tag");
  if (s.n < 1) throw std::invalid_argument("make_ou: n must be >= 1");
  AffineParams p;
  p.partition = IndexPartition::all_free(s.n);
  p.m0 = RVec::Zero(s.n);
  p.M = RMat::Zero(s.n, s.n);
  p.n0 = RMat::Zero(s.n, s.n);
  p.nk.assign(static_cast<std::size_t>(s.n), RMat());
  p.sigma_w_diag = RVec::Zero(s.n);
  for (int k = 0; k < s.n; ++k) {
    p.m0[k] = s.m0_rule.eval(k + 1);
    p.M(k, k) = -s.rho_rule.eval(k + 1);
    p.n0(k, k) = s.n0_rule.eval(k + 1);
    p.sigma_w_diag[k] = s.sigma_w_rule.eval(k + 1);
  }
  if (!psd_check(p.n0)) throw std::domain_error("make_ou: n0 must be PSD");
  p.decay = detail::decay_of(s, false);
  return p;
}

inline AffineParams make_family(const FamilySpec& s) {
  switch (s.family) {
    case FamilyKind::OU: return make_ou(s);
    case FamilyKind::CIR: return make_cir(s);
    case FamilyKind::Heston: return make_heston(s);
  }
  throw std::invalid_argument("make_family: unknown family");
}

/// Scalar square-root model used across examples: a = 1, rho = -1, lambda = 2.
inline AffineParams scalar_cir(double a = 1.0, double rho = -1.0, double lambda = 2.0) {
  FamilySpec s;
  s.family = FamilyKind::CIR;
  s.n = 1;
  s.lambda_rule = {DecayKind::Power, lambda, 0.0};
  s.rho_rule = {DecayKind::Power, -rho, 0.0};
  s.m0_rule = {DecayKind::Power, a, 0.0};
  AffineParams p = make_cir(s);
  p.decay.reset();  // constant rules have no decaying tail; report truncated values only
  return p;
}

}  // namespace affine_hilbert
