#pragma once

// Affine parameter data model (m0, M, n0, N) and the static validity
// checks: admissibility, inward-pointing drift, parallel volatility, and
// the existence/uniqueness side conditions.

#include "affine_hilbert/core.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace affine_hilbert {

enum class DecayKind { Power, Geometric };

/// Closed-form positive sequence i -> c * i^{-p} or c * r^i (i is 1-based).
struct DecayRule {
  DecayKind kind = DecayKind::Power;
  double c = 1.0;
  double exponent = 2.0;  // p for power, r for geometric

  double eval(int i) const {
    if (i < 1) throw std::invalid_argument("DecayRule: index must be >= 1");
    return kind == DecayKind::Power ? c * std::pow(static_cast<double>(i), -exponent)
                                    : c * std::pow(exponent, static_cast<double>(i));
  }

  /// Upper bound for sum_{i > n} rule(i); nullopt when the tail diverges.
  std::optional<double> tail_sum(int n) const {
    if (kind == DecayKind::Power) {
      if (exponent <= 1.0) return std::nullopt;
      // integral comparison: sum_{i>n} i^-p <= n^{1-p}/(p-1)
      return c * std::pow(static_cast<double>(n), 1.0 - exponent) / (exponent - 1.0);
    }
    if (exponent >= 1.0) return std::nullopt;
    return c * std::pow(exponent, static_cast<double>(n + 1)) / (1.0 - exponent);
  }

  /// Upper bound for sum_{i > n} rule(i)^2; nullopt when the tail diverges.
  std::optional<double> tail_sum_sq(int n) const {
    DecayRule sq;
    if (kind == DecayKind::Power) {
      sq = DecayRule{DecayKind::Power, c * c, 2.0 * exponent};
    } else {
      sq = DecayRule{DecayKind::Geometric, c * c, exponent * exponent};
    }
    return sq.tail_sum(n);
  }
};

/// Tail-decay descriptors certifying summability claims beyond the truncation.
struct TailDecay {
  std::optional<DecayRule> lambda_rule;
  std::optional<DecayRule> kappa_rule;
  std::optional<DecayRule> nu_rule;
  std::optional<DecayRule> rho_rule;
};

/// The affine tuple: mu(x) = m0 + M x, S(x) = n0 + sum_k x_k n_k.
struct AffineParams {
  IndexPartition partition;
  RVec m0;
  RMat M;
  RMat n0;
  std::vector<RMat> nk;  // nk[k] = N e_k; empty matrix means zero
  RVec sigma_w_diag;
  std::optional<TailDecay> decay;
  std::optional<RMat> sigma_w_full;  // optional full covariance (diagonality is checked)

  int n() const { return partition.n; }

  const RMat& n_k(int k) const {
    if (k < 0 || k >= static_cast<int>(nk.size()))
      throw std::invalid_argument("AffineParams: nk index out of range");
    return nk[static_cast<std::size_t>(k)];
  }
};

enum class FindingStatus { Pass, Fail, TruncationOnly };

struct Finding {
  std::string id;
  FindingStatus status = FindingStatus::Pass;
  double residual = 0.0;
  std::string detail;

  bool passed() const { return status != FindingStatus::Fail; }
};

struct AdmissibilityReport {
  bool overall = true;
  std::vector<Finding> findings;

  void add(std::string id, bool pass, double residual, std::string detail = {}) {
    findings.push_back({std::move(id), pass ? FindingStatus::Pass : FindingStatus::Fail,
                        residual, std::move(detail)});
    overall = overall && pass;
  }

  void add_truncation_only(std::string id, double residual, std::string detail = {}) {
    findings.push_back({std::move(id), FindingStatus::TruncationOnly, residual, std::move(detail)});
  }

  const Finding* find(const std::string& id) const {
    for (const auto& f : findings)
      if (f.id == id) return &f;
    return nullptr;
  }

  /// Merges another report; overall is the conjunction.
  void merge(const AdmissibilityReport& other) {
    for (const auto& f : other.findings) findings.push_back(f);
    overall = overall && other.overall;
  }
};

inline RVec mu(const AffineParams& p, const RVec& x) { return p.m0 + p.M * x; }

inline RMat S_op(const AffineParams& p, const RVec& x) {
  RMat S = p.n0;
  for (int k = 0; k < p.n(); ++k) {
    const RMat& nk = p.n_k(k);
    if (nk.size() != 0 && x[k] != 0.0) S += x[k] * nk;
  }
  return S;
}

/// lambda_i = ||pi_I S(e_i) e_i||, kappa_i = ||pi_J S(e_i) e_i|| over I,
/// ordered like the partition's I set.
inline std::pair<std::vector<double>, std::vector<double>> lambda_kappa(const AffineParams& p) {
  std::vector<double> lambda, kappa;
  lambda.reserve(p.partition.I.size());
  kappa.reserve(p.partition.I.size());
  for (int i : p.partition.I) {
    RVec ei = RVec::Zero(p.n());
    ei[i] = 1.0;
    RVec s = S_op(p, ei) * ei;
    lambda.push_back(project(s, p.partition.I).norm());
    kappa.push_back(project(s, p.partition.J).norm());
  }
  return {lambda, kappa};
}

namespace detail {

inline std::string fmt_idx(int k) { return std::to_string(k + 1); }  // 1-based in messages

inline const RMat& zero_or(const RMat& m, RMat& scratch, int n) {
  if (m.size() != 0) return m;
  scratch = RMat::Zero(n, n);
  return scratch;
}

}  // namespace detail

/// The admissibility conditions: one finding per condition, failures are
/// findings rather than exceptions.
inline AdmissibilityReport check_admissibility(const AffineParams& p, double tol = 1e-10) {
  AdmissibilityReport rep;
  const auto& I = p.partition.I;
  const auto& J = p.partition.J;
  const int n = p.n();
  RMat scratch;

  // m0 in X: I-coordinates nonnegative.
  {
    double worst = 0.0;
    for (int i : I) worst = std::min(worst, p.m0[i]);
    rep.add("m0_in_X", worst >= -tol, worst);
  }
  // m_i off-diagonal I-part nonnegative for i in I.
  {
    double worst = 0.0;
    for (int i : I)
      for (int k : I)
        if (k != i) worst = std::min(worst, p.M(k, i));
    rep.add("mi_offdiag_nonneg", worst >= -tol, worst);
  }
  // m_j in H_J for j in J.
  {
    double worst = 0.0;
    for (int j : J)
      for (int i : I) worst = std::max(worst, std::abs(p.M(i, j)));
    rep.add("mj_in_HJ", worst <= tol, worst);
  }
  // Row-sum bound: operator norm of M at truncation, tail via rho rule.
  {
    double val = spectral_norm(p.M);
    if (p.decay && p.decay->rho_rule) {
      auto tail = p.decay->rho_rule->tail_sum(n);
      if (tail) {
        rep.add("M_row_sum_bound", true, val + *tail,
                "truncated operator norm plus certified rho tail");
      } else {
        rep.add("M_row_sum_bound", false, val, "rho decay rule has divergent tail");
      }
    } else {
      rep.add_truncation_only("M_row_sum_bound", val, "no decay rule; truncated value only");
    }
  }
  // Each n_k for k in I is PSD (eigenvalues of the symmetric part; symmetry
  // defects are reported by the dedicated block findings below).
  {
    double worst = 0.0;
    for (int i : I) {
      const RMat& ni = detail::zero_or(p.n_k(i), scratch, n);
      worst = std::min(worst, min_eigenvalue(ni));
    }
    rep.add("nk_psd", worst >= -tol, worst);
  }
  // n_j = 0 for j in J.
  {
    double worst = 0.0;
    for (int j : J) {
      const RMat& nj = detail::zero_or(p.n_k(j), scratch, n);
      worst = std::max(worst, nj.cwiseAbs().maxCoeff());
    }
    rep.add("nj_zero", worst <= tol, worst);
  }
  // n0 blocks.
  {
    double worst = 0.0;
    for (int i : I)
      for (int k : I) worst = std::max(worst, std::abs(p.n0(i, k)));
    rep.add("n0_II_zero", worst <= tol, worst);
  }
  {
    double worst = 0.0;
    for (int i : I)
      for (int j : J) worst = std::max(worst, std::max(std::abs(p.n0(i, j)), std::abs(p.n0(j, i))));
    rep.add("n0_IJ_zero", worst <= tol, worst);
  }
  {
    RMat n0jj = block(p.n0, J, J);
    double mev = min_eigenvalue(n0jj);
    rep.add("n0_JJ_psd", mev >= -tol && asymmetry(n0jj) <= tol, mev);
  }
  // n_i restricted to I x I: zero except a nonnegative (i,i) entry.
  {
    double worst = 0.0;
    double diag_worst = 0.0;
    for (int i : I) {
      const RMat& ni = detail::zero_or(p.n_k(i), scratch, n);
      for (int k : I)
        for (int l : I)
          if (!(k == i && l == i)) worst = std::max(worst, std::abs(ni(k, l)));
      diag_worst = std::min(diag_worst, ni(i, i));
    }
    rep.add("ni_II_pattern", worst <= tol && diag_worst >= -tol,
            worst > tol ? worst : diag_worst);
  }
  {
    double worst = 0.0;
    for (int i : I) {
      const RMat& ni = detail::zero_or(p.n_k(i), scratch, n);
      for (int k : I)
        for (int j : J) worst = std::max(worst, std::abs(ni(k, j) - ni(j, k)));
    }
    rep.add("ni_IJ_sym", worst <= tol, worst);
  }
  {
    double worst = 0.0;
    for (int i : I) {
      const RMat& ni = detail::zero_or(p.n_k(i), scratch, n);
      worst = std::min(worst, min_eigenvalue(block(ni, J, J)));
    }
    rep.add("ni_JJ_psd", worst >= -tol, worst);
  }
  // sum_{i in I} ||n_i||^2 with tail certificate from lambda/kappa rules.
  {
    double sum = 0.0;
    for (int i : I) {
      const RMat& ni = detail::zero_or(p.n_k(i), scratch, n);
      double s = spectral_norm(ni);
      sum += s * s;
    }
    if (p.decay && p.decay->lambda_rule) {
      // ||n_i|| <= lambda_i + kappa_i under the parallel structure.
      auto lt = p.decay->lambda_rule->tail_sum_sq(n);
      std::optional<double> kt =
          p.decay->kappa_rule ? p.decay->kappa_rule->tail_sum_sq(n) : std::optional<double>(0.0);
      if (lt && kt) {
        double tail = 2.0 * (*lt + *kt);  // (a+b)^2 <= 2a^2 + 2b^2
        rep.add("ni_norm_sum", true, sum + tail, "truncated sum plus certified lambda/kappa tail");
      } else {
        rep.add("ni_norm_sum", false, sum, "decay rule tail diverges");
      }
    } else {
      rep.add_truncation_only("ni_norm_sum", sum, "no decay rule; truncated value only");
    }
  }
  return rep;
}

/// Inward-pointing drift characterization.
inline AdmissibilityReport check_inward(const AffineParams& p, double tol = 1e-10) {
  AdmissibilityReport rep;
  const auto& I = p.partition.I;
  const auto& J = p.partition.J;
  {
    double worst = 0.0;
    for (int i : I) worst = std::min(worst, p.m0[i]);
    rep.add("m0_in_X", worst >= -tol, worst);
  }
  {
    double worst = 0.0;
    for (int i : I)
      for (int k : I)
        if (k != i) worst = std::min(worst, p.M(k, i));
    rep.add("M_ei_inward", worst >= -tol, worst);
  }
  {
    double worst = 0.0;
    for (int i : I)
      for (int j : J) worst = std::max(worst, std::abs(p.M(i, j)));
    rep.add("M_HJ_invariant", worst <= tol, worst);
  }
  return rep;
}

/// Parallel-volatility characterization.
inline AdmissibilityReport check_parallel(const AffineParams& p, double tol = 1e-10) {
  AdmissibilityReport rep;
  const auto& I = p.partition.I;
  const auto& J = p.partition.J;
  const int n = p.n();
  RMat scratch;
  {
    // n0 xi = 0 for xi in H_I: the I-columns of n0 vanish.
    double worst = 0.0;
    for (int i : I)
      for (int k = 0; k < n; ++k) worst = std::max(worst, std::abs(p.n0(k, i)));
    rep.add("n0_annihilates_HI", worst <= tol, worst);
  }
  {
    double worst = 0.0;
    for (int j : J) {
      const RMat& nj = detail::zero_or(p.n_k(j), scratch, n);
      worst = std::max(worst, nj.cwiseAbs().maxCoeff());
    }
    rep.add("nj_zero", worst <= tol, worst);
  }
  {
    // n_i e_j = 0 for distinct i, j in I.
    double worst = 0.0;
    for (int i : I) {
      const RMat& ni = detail::zero_or(p.n_k(i), scratch, n);
      for (int j : I)
        if (j != i) worst = std::max(worst, ni.col(j).cwiseAbs().maxCoeff());
    }
    rep.add("ni_cross_zero", worst <= tol, worst);
  }
  return rep;
}

/// Existence side conditions: (kappa/lambda) in l2, m0_I in the retracted
/// cone, M_II commuting with T, and l1-summable M_II row norms.
/// nu must follow the ordering of partition.I (as produced by the transform
/// module's retraction builder).
inline AdmissibilityReport check_existence_side_conditions(const AffineParams& p,
                                                           const std::vector<double>& nu,
                                                           double tol = 1e-10) {
  AdmissibilityReport rep;
  const auto& I = p.partition.I;
  if (nu.size() != I.size())
    throw std::invalid_argument("check_existence_side_conditions: nu size mismatch");
  auto [lambda, kappa] = lambda_kappa(p);

  {
    double sum = 0.0;
    for (std::size_t a = 0; a < I.size(); ++a)
      if (lambda[a] > 0.0) {
        double r = kappa[a] / lambda[a];
        sum += r * r;
      }
    if (p.decay && p.decay->lambda_rule && p.decay->kappa_rule) {
      // Both rules power with exponents pl, pk: ratio decays like i^{pl-pk};
      // both geometric: ratio rk/rl geometric. Certify via the quotient rule.
      const DecayRule& lr = *p.decay->lambda_rule;
      const DecayRule& kr = *p.decay->kappa_rule;
      std::optional<double> tail;
      if (lr.kind == kr.kind) {
        DecayRule ratio;
        if (lr.kind == DecayKind::Power)
          ratio = DecayRule{DecayKind::Power, kr.c / lr.c, kr.exponent - lr.exponent};
        else
          ratio = DecayRule{DecayKind::Geometric, kr.c / lr.c, kr.exponent / lr.exponent};
        tail = ratio.tail_sum_sq(p.n());
      }
      if (tail)
        rep.add("kappa_lambda_l2", true, sum + *tail, "truncated sum plus certified tail");
      else
        rep.add("kappa_lambda_l2", false, sum, "ratio tail not certifiable from the rules");
    } else if (p.decay && p.decay->lambda_rule && !p.decay->kappa_rule) {
      // No kappa rule means kappa is identically zero beyond the data we have.
      rep.add("kappa_lambda_l2", true, sum, "kappa treated as zero beyond truncation");
    } else {
      rep.add_truncation_only("kappa_lambda_l2", sum, "no decay rule; truncated value only");
    }
  }
  {
    // m0_I in H_{I,0}^+: nonnegative I-part with finite weighted norm.
    double wsum = 0.0;
    double neg = 0.0;
    for (std::size_t a = 0; a < I.size(); ++a) {
      double m = p.m0[I[a]];
      neg = std::min(neg, m);
      double r = m / nu[a];
      wsum += r * r;
    }
    rep.add("m0I_in_HI0", neg >= -tol && std::isfinite(wsum), neg < -tol ? neg : wsum);
  }
  {
    // Commutation M_II T = T M_II with T = diag(nu) over I.
    double worst = 0.0;
    for (std::size_t a = 0; a < I.size(); ++a)
      for (std::size_t b = 0; b < I.size(); ++b)
        worst = std::max(worst, std::abs(p.M(I[a], I[b]) * (nu[b] - nu[a])));
    rep.add("MT_commute", worst <= tol, worst);
  }
  {
    double sum = 0.0;
    for (int i : I) {
      double r = 0.0;
      for (int k : I) r += p.M(i, k) * p.M(i, k);
      sum += std::sqrt(r);
    }
    if (p.decay && p.decay->rho_rule) {
      auto tail = p.decay->rho_rule->tail_sum(p.n());
      if (tail)
        rep.add("M_rowsum_l1", true, sum + *tail, "truncated sum plus certified rho tail");
      else
        rep.add("M_rowsum_l1", false, sum, "rho decay rule has divergent tail");
    } else {
      rep.add_truncation_only("M_rowsum_l1", sum, "no decay rule; truncated value only");
    }
  }
  return rep;
}

/// Pathwise-uniqueness side conditions as checkable predicates.
inline AdmissibilityReport check_uniqueness_conditions(const AffineParams& p, double tol = 1e-10) {
  AdmissibilityReport rep;
  {
    double worst = 0.0;
    if (p.sigma_w_full) {
      const RMat& S = *p.sigma_w_full;
      for (Eigen::Index r = 0; r < S.rows(); ++r)
        for (Eigen::Index c = 0; c < S.cols(); ++c)
          if (r != c) worst = std::max(worst, std::abs(S(r, c)));
    }
    double minw = p.sigma_w_diag.size() ? p.sigma_w_diag.minCoeff() : 1.0;
    rep.add("sigma_w_diagonal", worst <= tol && minw > 0.0, worst > tol ? worst : minw);
  }
  {
    // Lipschitz row constants of mu: L_i = ||row i of M||.
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.M.rows(); ++i) sum += p.M.row(i).norm();
    if (p.decay && p.decay->rho_rule) {
      auto tail = p.decay->rho_rule->tail_sum(p.n());
      if (tail)
        rep.add("mu_lipschitz_l1", true, sum + *tail, "truncated sum plus certified rho tail");
      else
        rep.add("mu_lipschitz_l1", false, sum, "rho decay rule has divergent tail");
    } else {
      rep.add_truncation_only("mu_lipschitz_l1", sum, "no decay rule; truncated value only");
    }
  }
  {
    AdmissibilityReport par = check_parallel(p, tol);
    double worst = 0.0;
    for (const auto& f : par.findings) worst = std::max(worst, std::abs(f.residual));
    rep.add("sigma_diagonal_structure", par.overall, worst,
            "diagonal transformed volatility; delegated to the parallel check");
  }
  rep.add("sqrt_holder_modulus", true, 0.0,
          "sqrt(lambda_i y) obeys the 1/2-Hoelder modulus c*sqrt(u); 1/rho^2 non-integrable at 0");
  return rep;
}

}  // namespace affine_hilbert
