#pragma once

// Monte Carlo checks of the law-level identities: exponential-affine
// characteristic function, martingale property of the exponential
// functional, the joint Laplace composition, cone invariance and the
// shared-noise uniqueness surrogate.

#include "affine_hilbert/core.hpp"
#include "affine_hilbert/params.hpp"
#include "affine_hilbert/riccati.hpp"
#include "affine_hilbert/simulate.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace affine_hilbert {

struct VerifyConfig {
  long n_paths = 100000;
  double dt = 1e-3;
  std::uint64_t master_seed = 0;
  double z_crit = 4.0;
  int n_threads = 1;
  long min_paths_power = 1000;  // below this a power warning is attached
  bool richardson = true;       // estimate the discretization allowance from a dt/2 rerun
  SolverOpts riccati;
};

struct VerifyRecord {
  CVec u;
  Complex mc{0.0, 0.0};
  double mc_stderr = 0.0;
  Complex analytic{0.0, 0.0};
  double z = 0.0;          // Mahalanobis distance of the (Re, Im) gap
  double allowance = 0.0;  // discretization bias allowance
  bool pass = true;
  std::string label;
};

struct VerificationReport {
  std::string test;
  std::vector<VerifyRecord> records;
  bool pass = true;
  std::vector<std::string> warnings;
  long n_paths = 0;
  double dt = 0.0;
  double t = 0.0;
  std::uint64_t master_seed = 0;
};

namespace detail {

/// Deterministic pairwise reduction: the result does not depend on how paths
/// were scheduled, only on their order.
inline Complex pairwise_sum(const std::vector<Complex>& v, std::size_t lo, std::size_t hi) {
  if (hi - lo <= 8) {
    Complex s{0.0, 0.0};
    for (std::size_t k = lo; k < hi; ++k) s += v[k];
    return s;
  }
  std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline Complex pairwise_mean(const std::vector<Complex>& v) {
  if (v.empty()) throw std::invalid_argument("pairwise_mean: empty sample");
  return pairwise_sum(v, 0, v.size()) / static_cast<double>(v.size());
}

struct SampleStats {
  Complex mean{0.0, 0.0};
  double stderr_ = 0.0;
  double var_rr = 0.0, var_ii = 0.0, var_ri = 0.0;  // covariance of (Re, Im)
  long n = 0;
};

inline SampleStats stats_of(const std::vector<Complex>& v) {
  SampleStats s;
  s.n = static_cast<long>(v.size());
  s.mean = pairwise_mean(v);
  if (v.size() < 2) return s;
  double srr = 0.0, sii = 0.0, sri = 0.0;
  for (const Complex& x : v) {
    double dr = x.real() - s.mean.real();
    double di = x.imag() - s.mean.imag();
    srr += dr * dr;
    sii += di * di;
    sri += dr * di;
  }
  double denom = static_cast<double>(v.size() - 1);
  s.var_rr = srr / denom;
  s.var_ii = sii / denom;
  s.var_ri = sri / denom;
  s.stderr_ = std::sqrt((s.var_rr + s.var_ii) / static_cast<double>(v.size()));
  return s;
}

/// Mahalanobis distance of gap against the standard-error covariance.
inline double mahalanobis(const SampleStats& s, Complex gap) {
  double crr = s.var_rr / s.n, cii = s.var_ii / s.n, cri = s.var_ri / s.n;
  double det = crr * cii - cri * cri;
  double gr = gap.real(), gi = gap.imag();
  if (det <= 1e-300) {
    double v = std::max(crr, cii);
    return v > 0.0 ? std::abs(gap) / std::sqrt(v) : (std::abs(gap) > 0.0 ? 1e300 : 0.0);
  }
  double q = (cii * gr * gr - 2.0 * cri * gr * gi + crr * gi * gi) / det;
  return std::sqrt(std::max(q, 0.0));
}

inline std::vector<Complex> char_fn_samples(const PathEnsemble& ens, const CVec& u,
                                            std::size_t time_index) {
  std::vector<Complex> out;
  out.reserve(static_cast<std::size_t>(ens.n_paths()));
  for (long p = 0; p < ens.n_paths(); ++p) {
    const RVec& x = ens.states[static_cast<std::size_t>(p)][time_index];
    Complex e{0.0, 0.0};
    for (Eigen::Index k = 0; k < x.size(); ++k) e += u[k] * x[k];
    Complex val = std::exp(e);
    if (std::abs(val) > 1.0 + 1e-12)
      throw std::runtime_error("char_fn_samples: summand modulus exceeds 1 (u outside U?)");
    out.push_back(val);
  }
  return out;
}

}  // namespace detail

/// Sample mean and standard error of exp(<u, X_T>) over the ensemble.
inline std::pair<Complex, double> mc_char_fn(const PathEnsemble& ens, const CVec& u) {
  if (ens.n_paths() == 0) throw std::invalid_argument("mc_char_fn: empty ensemble");
  auto samples = detail::char_fn_samples(ens, u, ens.times.size() - 1);
  auto s = detail::stats_of(samples);
  return {s.mean, s.stderr_};
}

/// Default u-grid: log-spaced negative reals on the cone coordinates crossed
/// with an imaginary grid on the free coordinates, inside U by construction.
inline std::vector<CVec> default_u_batch(const IndexPartition& part) {
  std::vector<double> re_levels = {-0.25, -1.0, -4.0};
  std::vector<double> im_levels = {-1.0, 0.5};
  std::vector<CVec> batch;
  auto push = [&](double a, double b) {
    CVec u = CVec::Zero(part.n);
    for (int i : part.I) u[i] = Complex(a, 0.0);
    for (int j : part.J) u[j] = Complex(0.0, b);
    batch.push_back(u);
  };
  if (part.I.empty()) {
    for (double b : im_levels) push(0.0, b);
    push(0.0, 2.0);
  } else if (part.J.empty()) {
    for (double a : re_levels) push(a, 0.0);
  } else {
    for (double a : re_levels)
      for (double b : im_levels) push(a, b);
  }
  return batch;
}

namespace detail {

inline void attach_power_warning(VerificationReport& rep, const VerifyConfig& cfg) {
  if (cfg.n_paths < cfg.min_paths_power)
    rep.warnings.push_back("insufficient statistical power: fewer than " +
                           std::to_string(cfg.min_paths_power) + " paths");
}

}  // namespace detail

/// Characteristic-function identity: MC estimate of exp(<u, X_t>) against
/// exp(phi(t,u) + <psi(t,u), x0>) for each u in the batch.
inline VerificationReport affine_identity_test(const AffineParams& p, const RVec& x0, double t,
                                               const std::vector<CVec>& u_batch,
                                               const VerifyConfig& cfg) {
  VerificationReport rep;
  rep.test = "affine_identity";
  rep.n_paths = cfg.n_paths;
  rep.dt = cfg.dt;
  rep.t = t;
  rep.master_seed = cfg.master_seed;
  detail::attach_power_warning(rep, cfg);

  SimConfig sc;
  sc.t_end = t;
  sc.dt = cfg.dt;
  sc.n_paths = cfg.n_paths;
  sc.master_seed = cfg.master_seed;
  sc.n_threads = cfg.n_threads;
  PathEnsemble ens = simulate_paths(p, x0, sc);
  PathEnsemble ens_half;
  if (cfg.richardson) {
    SimConfig sh = sc;
    sh.dt = cfg.dt / 2.0;
    ens_half = simulate_paths(p, x0, sh);
  }

  for (const CVec& u : u_batch) {
    VerifyRecord r;
    r.u = u;
    auto [mc, se] = mc_char_fn(ens, u);
    r.mc = mc;
    r.mc_stderr = se;
    RiccatiSolution sol = solve_riccati(p, u, t, cfg.riccati);
    Complex exponent = sol.phi_end() + cpair(sol.psi_end(), x0.cast<Complex>());
    r.analytic = std::exp(exponent);
    if (cfg.richardson) {
      auto [mc2, se2] = mc_char_fn(ens_half, u);
      (void)se2;
      r.allowance = 2.0 * std::abs(mc - mc2);  // c*dt with c from the Richardson pair
    }
    Complex gap = r.mc - r.analytic;
    auto s = detail::stats_of(detail::char_fn_samples(ens, u, ens.times.size() - 1));
    r.z = detail::mahalanobis(s, gap);
    r.pass = std::abs(gap) <= cfg.z_crit * r.mc_stderr + r.allowance;
    rep.pass = rep.pass && r.pass;
    rep.records.push_back(std::move(r));
  }
  return rep;
}

/// Martingale property of M^u_t = exp(phi(T-t,u) + <psi(T-t,u), X_t>):
/// checkpoint means must agree with the deterministic t = 0 value, and the
/// modulus never exceeds 1 pathwise.
inline VerificationReport martingale_test(const AffineParams& p, const RVec& x0, double T,
                                          const CVec& u, const std::vector<double>& checkpoints,
                                          const VerifyConfig& cfg) {
  VerificationReport rep;
  rep.test = "martingale";
  rep.n_paths = cfg.n_paths;
  rep.dt = cfg.dt;
  rep.t = T;
  rep.master_seed = cfg.master_seed;
  detail::attach_power_warning(rep, cfg);

  SimConfig sc;
  sc.t_end = T;
  sc.dt = cfg.dt;
  sc.n_paths = cfg.n_paths;
  sc.master_seed = cfg.master_seed;
  sc.n_threads = cfg.n_threads;
  sc.store = StoreMode::Times;
  sc.store_times = checkpoints;
  PathEnsemble ens = simulate_paths(p, x0, sc);

  RiccatiSolution base = solve_riccati(p, u, T, cfg.riccati);
  Complex m0_value = std::exp(base.phi_end() + cpair(base.psi_end(), x0.cast<Complex>()));

  for (std::size_t ti = 0; ti < ens.times.size(); ++ti) {
    double t = ens.times[ti];
    RiccatiSolution sol = solve_riccati(p, u, T - t, cfg.riccati);
    std::vector<Complex> samples;
    samples.reserve(static_cast<std::size_t>(ens.n_paths()));
    double max_mod = 0.0;
    for (long path = 0; path < ens.n_paths(); ++path) {
      const RVec& x = ens.states[static_cast<std::size_t>(path)][ti];
      Complex val = std::exp(sol.phi_end() + cpair(sol.psi_end(), x.cast<Complex>()));
      max_mod = std::max(max_mod, std::abs(val));
      samples.push_back(val);
    }
    auto s = detail::stats_of(samples);
    VerifyRecord r;
    r.u = u;
    r.label = "t=" + std::to_string(t);
    r.mc = s.mean;
    r.mc_stderr = s.stderr_;
    r.analytic = m0_value;
    Complex gap = r.mc - r.analytic;
    r.z = detail::mahalanobis(s, gap);
    // discretization bias accumulates only through X_t; reuse the 4 SE band
    // plus a modest first-order allowance proportional to dt
    r.allowance = cfg.dt * std::abs(m0_value);
    bool bound_ok = max_mod <= 1.0 + 1e-12;
    if (!bound_ok) rep.warnings.push_back("pathwise modulus bound violated at " + r.label);
    r.pass = bound_ok && std::abs(gap) <= cfg.z_crit * r.mc_stderr + r.allowance;
    rep.pass = rep.pass && r.pass;
    rep.records.push_back(std::move(r));
  }
  return rep;
}

/// Joint Laplace functional at two times against the flow composition:
/// E exp(<u, X_s> + <v, X_t>) = exp(phi(t-s,v)) *
/// exp(phi(s, u + psi(t-s,v)) + <psi(s, u + psi(t-s,v)), x0>).
inline VerificationReport joint_laplace_test(const AffineParams& p, const RVec& x0, double s,
                                             double t, const CVec& u, const CVec& v,
                                             const VerifyConfig& cfg) {
  if (!(s < t)) throw std::invalid_argument("joint_laplace_test: requires s < t");
  VerificationReport rep;
  rep.test = "joint_laplace";
  rep.n_paths = cfg.n_paths;
  rep.dt = cfg.dt;
  rep.t = t;
  rep.master_seed = cfg.master_seed;
  detail::attach_power_warning(rep, cfg);

  SimConfig sc;
  sc.t_end = t;
  sc.dt = cfg.dt;
  sc.n_paths = cfg.n_paths;
  sc.master_seed = cfg.master_seed;
  sc.n_threads = cfg.n_threads;
  sc.store = StoreMode::Times;
  sc.store_times = {s, t};
  PathEnsemble ens = simulate_paths(p, x0, sc);
  std::size_t si = 0, ti = ens.times.size() - 1;
  for (std::size_t k = 0; k < ens.times.size(); ++k)
    if (std::abs(ens.times[k] - s) < 1e-12) si = k;

  std::vector<Complex> samples;
  samples.reserve(static_cast<std::size_t>(ens.n_paths()));
  for (long path = 0; path < ens.n_paths(); ++path) {
    const RVec& xs = ens.states[static_cast<std::size_t>(path)][si];
    const RVec& xt = ens.states[static_cast<std::size_t>(path)][ti];
    Complex e{0.0, 0.0};
    for (Eigen::Index k = 0; k < xs.size(); ++k) e += u[k] * xs[k] + v[k] * xt[k];
    samples.push_back(std::exp(e));
  }
  auto st = detail::stats_of(samples);

  RiccatiSolution inner = solve_riccati(p, v, t - s, cfg.riccati);
  CVec w = u + inner.psi_end();
  RiccatiSolution outer = solve_riccati(p, w, s, cfg.riccati);
  Complex analytic =
      std::exp(inner.phi_end()) *
      std::exp(outer.phi_end() + cpair(outer.psi_end(), x0.cast<Complex>()));

  VerifyRecord r;
  r.u = u;
  r.label = "s=" + std::to_string(s) + ",t=" + std::to_string(t);
  r.mc = st.mean;
  r.mc_stderr = st.stderr_;
  r.analytic = analytic;
  Complex gap = r.mc - r.analytic;
  r.z = detail::mahalanobis(st, gap);
  r.allowance = cfg.dt * std::abs(analytic) * 4.0;
  r.pass = std::abs(gap) <= cfg.z_crit * r.mc_stderr + r.allowance;
  rep.pass = r.pass;
  rep.records.push_back(std::move(r));
  return rep;
}

struct ConeReport {
  double violation_fraction = 0.0;
  long violations = 0;
  long total_checked = 0;
  double max_negative_excursion = 0.0;  // pre-clamp, from the scheme diagnostics
  long clamp_count = 0;
  bool pass = true;
};

/// Stored states must lie in the cone exactly under the truncation scheme;
/// pre-clamp excursions are reported as scheme-quality data.
inline ConeReport cone_invariance_test(const PathEnsemble& ens, const IndexPartition& part) {
  ConeReport rep;
  rep.max_negative_excursion = ens.max_negative_excursion;
  rep.clamp_count = ens.clamp_count;
  for (const auto& path : ens.states)
    for (const RVec& x : path)
      for (int i : part.I) {
        ++rep.total_checked;
        if (x[i] < 0.0) ++rep.violations;
      }
  rep.violation_fraction =
      rep.total_checked ? static_cast<double>(rep.violations) / rep.total_checked : 0.0;
  rep.pass = rep.violations == 0;
  return rep;
}

struct UniquenessReport {
  double eps = 0.0;
  std::vector<double> terminal_gaps;  // max over paths, one entry per perturbed coordinate
  double envelope = 0.0;              // exp(L t) * eps with L the drift Lipschitz constant
  bool exact_at_zero = true;
  bool pass = true;
};

/// Shared-noise coupling: perturbing the start by eps along each cone
/// coordinate must keep terminal paths within the Gronwall envelope; at
/// eps = 0 the runs must coincide bitwise.
inline UniquenessReport pathwise_uniqueness_test(const AffineParams& p, const RVec& x0, double eps,
                                                 const SimConfig& cfg) {
  if (eps < 0.0) throw std::invalid_argument("pathwise_uniqueness_test: eps must be >= 0");
  UniquenessReport rep;
  rep.eps = eps;
  double L = spectral_norm(p.M);
  rep.envelope = std::exp(L * cfg.t_end) * eps;

  PathEnsemble base = simulate_paths(p, x0, cfg);
  if (eps == 0.0) {
    PathEnsemble again = simulate_paths(p, x0, cfg);
    for (long path = 0; path < base.n_paths(); ++path) {
      const RVec& a = base.terminal(path);
      const RVec& b = again.terminal(path);
      for (Eigen::Index k = 0; k < a.size(); ++k)
        if (a[k] != b[k]) rep.exact_at_zero = false;
    }
    rep.pass = rep.exact_at_zero;
    return rep;
  }

  const std::vector<int>& coords = p.partition.I.empty() ? p.partition.J : p.partition.I;
  // slack covers the scheme's truncation nonlinearity near the cone boundary
  const double slack = 1.5;
  for (int i : coords) {
    RVec x1 = x0;
    x1[i] += eps;
    PathEnsemble shifted = simulate_paths(p, x1, cfg);
    double gap = 0.0;
    for (long path = 0; path < base.n_paths(); ++path)
      gap = std::max(gap, (base.terminal(path) - shifted.terminal(path)).norm());
    rep.terminal_gaps.push_back(gap);
    if (gap > rep.envelope * slack + 1e-12) rep.pass = false;
  }
  return rep;
}

}  // namespace affine_hilbert
