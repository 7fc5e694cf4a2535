#pragma once

// Generalized Riccati system for (phi, psi): right-hand sides, closed-form
// free-block propagation, fixed and adaptive integrators, and the runtime
// certificates (domain invariance, scalar comparison, growth bound).

#include "affine_hilbert/core.hpp"
#include "affine_hilbert/params.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace affine_hilbert {

enum class RiccatiMethod { RK4Fixed, AdaptiveRK45 };

struct SolverOpts {
  RiccatiMethod method = RiccatiMethod::AdaptiveRK45;
  double dt = 1e-3;         // fixed-step size
  double atol = 1e-9;       // adaptive tolerances
  double rtol = 1e-9;
  double cert_tol = 1e-8;
  bool hard_certificates = true;   // violation throws instead of recording
  bool full_system = false;        // integrate psi_J by ODE instead of expm
  bool check_gronwall = true;
  int gronwall_quad_steps = 512;
  long max_steps = 2000000;
};

struct CertRecord {
  double t = 0.0;
  double re_phi = 0.0;
  double max_re_psi_I = 0.0;
  double max_abs_re_psi_J = 0.0;
  double psi_I_norm_sq = 0.0;
  double gronwall = std::numeric_limits<double>::quiet_NaN();
  bool violated = false;
};

struct RiccatiSolution {
  std::vector<double> grid;
  std::vector<Complex> phi;
  std::vector<CVec> psi;
  CVec u;
  std::vector<CertRecord> certificates;

  Complex phi_end() const { return phi.back(); }
  const CVec& psi_end() const { return psi.back(); }
};

class solver_error : public std::runtime_error {
 public:
  double time;
  double residual;
  solver_error(const std::string& what, double t, double r)
      : std::runtime_error(what), time(t), residual(r) {}
};

/// Coordinate-wise field: (rhs)_k = cpair(m_k, psi) + 1/2 cpair(n_k psi, psi)
/// with m_k = M e_k.
inline CVec rhs_psi(const AffineParams& p, const CVec& psi) {
  if (psi.size() != p.n()) throw std::invalid_argument("rhs_psi: length mismatch");
  CVec out(p.n());
  for (int k = 0; k < p.n(); ++k) {
    Complex lin{0.0, 0.0};
    for (int l = 0; l < p.n(); ++l) lin += p.M(l, k) * psi[l];
    Complex quad{0.0, 0.0};
    const RMat& nk = p.n_k(k);
    if (nk.size() != 0) {
      CVec nkpsi = nk * psi.real() + Complex(0.0, 1.0) * (nk * psi.imag());
      quad = 0.5 * cpair(nkpsi, psi);
    }
    out[k] = lin + quad;
  }
  return out;
}

/// Semilinear form M^T psi + f(psi), f supported on the cone coordinates.
/// Independent evaluation path kept for consistency checks against rhs_psi.
inline CVec rhs_psi_semilinear(const AffineParams& p, const CVec& psi) {
  if (psi.size() != p.n()) throw std::invalid_argument("rhs_psi_semilinear: length mismatch");
  CVec out = p.M.transpose() * psi.real() + Complex(0.0, 1.0) * (p.M.transpose() * psi.imag());
  for (int i : p.partition.I) {
    const RMat& ni = p.n_k(i);
    if (ni.size() == 0) continue;
    CVec nipsi = ni * psi.real() + Complex(0.0, 1.0) * (ni * psi.imag());
    out[i] += 0.5 * cpair(nipsi, psi);
  }
  return out;
}

inline Complex rhs_phi(const AffineParams& p, const CVec& psi) {
  if (psi.size() != p.n()) throw std::invalid_argument("rhs_phi: length mismatch");
  CVec m0c = p.m0.cast<Complex>();
  CVec n0psi = p.n0 * psi.real() + Complex(0.0, 1.0) * (p.n0 * psi.imag());
  return cpair(m0c, psi) + 0.5 * cpair(n0psi, psi);
}

/// psi_J(t, u) = exp(t M_JJ^T) u_J: the free block solves a linear ODE.
/// The real matrix exponential maps purely imaginary u_J to purely
/// imaginary values.
inline CVec psi_J_closed(const AffineParams& p, const CVec& uJ, double t) {
  if (uJ.size() != p.n()) throw std::invalid_argument("psi_J_closed: length mismatch");
  RMat MJJt = block(p.M, p.partition.J, p.partition.J).transpose();
  RMat E = (t * MJJt).exp();
  CVec uj = project(uJ, p.partition.J);
  CVec out = E * uj.real() + Complex(0.0, 1.0) * (E * uj.imag());
  return project(out, p.partition.J);
}

/// Closed-form solution of dg = C (g^2 - 2 g), g(0) = u0 < 0; dominates
/// Re psi_i in the scalar comparison certificate.
inline double scalar_riccati(double u0, double C, double t) {
  if (u0 >= 0.0) throw std::invalid_argument("scalar_riccati: u0 must be negative");
  if (C < 0.0) throw std::invalid_argument("scalar_riccati: C must be nonnegative");
  double e = std::exp(2.0 * C * t);
  return 2.0 * u0 / (2.0 * e - u0 * (e - 1.0));
}

namespace detail {

/// Growth-bound constant: sum of squared volatility-operator norms over the
/// cone coordinates, plus the squared drift norm, plus 7/2.
inline double gronwall_C(const AffineParams& p) {
  double s = 0.0;
  for (int i : p.partition.I) {
    const RMat& ni = p.n_k(i);
    if (ni.size() == 0) continue;
    double v = spectral_norm(ni);
    s += v * v;
  }
  double m = spectral_norm(p.M);
  return s + m * m + 3.5;
}

/// h(s) = 1 + ||psi_J(s)||^2 + ||psi_J(s)||^4 sampled on a uniform grid of
/// quad_steps panels over [0, t], propagating psi_J one panel at a time.
inline std::vector<double> gronwall_h_samples(const AffineParams& p, const CVec& u, double t,
                                              int quad_steps) {
  if (quad_steps < 2) throw std::invalid_argument("gronwall: quad_steps must be >= 2");
  if (quad_steps % 2 != 0) ++quad_steps;
  double ds = t / quad_steps;
  RMat MJJt = block(p.M, p.partition.J, p.partition.J).transpose();
  RMat E = (ds * MJJt).exp();
  RVec re = project(CVec(u), p.partition.J).real();
  RVec im = project(CVec(u), p.partition.J).imag();
  std::vector<double> h(static_cast<std::size_t>(quad_steps) + 1);
  for (int m = 0; m <= quad_steps; ++m) {
    double n2 = 0.0;
    for (int j : p.partition.J) n2 += re[j] * re[j] + im[j] * im[j];
    h[static_cast<std::size_t>(m)] = 1.0 + n2 + n2 * n2;
    if (m < quad_steps) {
      re = E * re;
      im = E * im;
    }
  }
  return h;
}

/// Composite-Simpson cumulative integral of uniformly sampled values
/// (pairs of panels; odd nodes get a trapezoid half-panel correction so the
/// cumulative array is defined at every node).
inline std::vector<double> simpson_cumulative(const std::vector<double>& f, double ds) {
  std::vector<double> G(f.size(), 0.0);
  for (std::size_t m = 2; m < f.size(); m += 2)
    G[m] = G[m - 2] + ds / 3.0 * (f[m - 2] + 4.0 * f[m - 1] + f[m]);
  for (std::size_t m = 1; m < f.size(); m += 2)
    G[m] = G[m - 1] + 0.5 * ds * (f[m - 1] + f[m]);
  return G;
}

}  // namespace detail

/// ||u_I||^2 + C (1 + ||u_I||^2) * Int_0^t h(s) exp(C Int_s^t h) ds with
/// h(s) = 1 + ||psi_J(s)||^2 + ||psi_J(s)||^4. The inner integral G is
/// composite Simpson; the outer one has the exact antiderivative
/// -exp(C (G(t) - G(s))) / C, so it evaluates to (exp(C G(t)) - 1) / C.
inline double gronwall_bound(const AffineParams& p, const CVec& u, double t,
                             int quad_steps = 512) {
  if (!in_U(u, p.partition, 1e-12)) throw std::domain_error("gronwall_bound: u outside U");
  double uI2 = 0.0;
  for (int i : p.partition.I) uI2 += std::norm(u[i]);
  if (t <= 0.0) return uI2;
  double C = detail::gronwall_C(p);
  auto h = detail::gronwall_h_samples(p, u, t, quad_steps);
  double ds = t / static_cast<double>(h.size() - 1);
  double Gt = detail::simpson_cumulative(h, ds).back();
  return uI2 + (1.0 + uI2) * std::expm1(C * Gt);
}

namespace detail {

/// Linear interpolation of the bound along a precomputed uniform grid; used
/// for the per-step certificate so the double quadrature runs once per solve.
struct GronwallTable {
  double t_end = 0.0;
  double uI2 = 0.0;
  double C = 0.0;
  std::vector<double> G;  // cumulative integral of h at uniform nodes

  double bound(double t) const {
    if (G.empty()) return uI2;
    if (t <= 0.0) return uI2;
    double ds = t_end / static_cast<double>(G.size() - 1);
    double pos = std::min(t / ds, static_cast<double>(G.size() - 1));
    auto lo = static_cast<std::size_t>(pos);
    if (lo >= G.size() - 1) lo = G.size() - 2;
    double w = pos - static_cast<double>(lo);
    double Gt = (1.0 - w) * G[lo] + w * G[lo + 1];
    // exact outer integral: Int_0^t h e^{C(G(t)-G(s))} ds = (e^{C G(t)} - 1)/C
    return uI2 + (1.0 + uI2) * std::expm1(C * Gt);
  }

  static GronwallTable build(const AffineParams& p, const CVec& u, double t_end, int quad_steps) {
    GronwallTable tab;
    tab.t_end = t_end;
    for (int i : p.partition.I) tab.uI2 += std::norm(u[i]);
    tab.C = gronwall_C(p);
    if (t_end > 0.0) {
      auto h = gronwall_h_samples(p, u, t_end, quad_steps);
      tab.G = simpson_cumulative(h, t_end / static_cast<double>(h.size() - 1));
    }
    return tab;
  }
};

struct RiccatiState {
  CVec psi;
  Complex phi;
};

}  // namespace detail

/// Integrates the coupled (psi, phi) system from (u, 0) to t_end.
/// Default mode propagates the free block by the matrix exponential and the
/// cone block (plus phi) by the ODE scheme; full_system integrates all
/// coordinates together as a cross-check.
inline RiccatiSolution solve_riccati(const AffineParams& p, const CVec& u, double t_end,
                                     const SolverOpts& opts = {}) {
  if (u.size() != p.n()) throw std::invalid_argument("solve_riccati: u length mismatch");
  if (t_end < 0.0) throw std::invalid_argument("solve_riccati: t_end must be nonnegative");
  if (!in_U(u, p.partition, 1e-12)) throw std::domain_error("solve_riccati: u outside U");
  if (opts.dt <= 0.0 || opts.atol <= 0.0 || opts.rtol <= 0.0)
    throw std::invalid_argument("solve_riccati: step and tolerances must be positive");

  const auto& J = p.partition.J;
  const bool split = !opts.full_system && !J.empty();

  // free-block propagator pieces for split mode
  RMat MJJt;
  if (split) MJJt = block(p.M, J, J).transpose();
  auto psiJ_at = [&](double t) -> CVec {
    RMat E = (t * MJJt).exp();
    CVec uj = project(u, J);
    CVec out = E * uj.real() + Complex(0.0, 1.0) * (E * uj.imag());
    return project(out, J);
  };

  // field on the integrated coordinates; in split mode the J components are
  // overwritten from the closed form before evaluation and their derivative
  // is forced to zero
  auto field = [&](double t, const CVec& psi_in, CVec& dpsi, Complex& dphi) {
    CVec psi = psi_in;
    if (split) {
      CVec pj = psiJ_at(t);
      for (int j : J) psi[j] = pj[j];
    }
    dpsi = rhs_psi(p, psi);
    if (split)
      for (int j : J) dpsi[j] = Complex{0.0, 0.0};
    dphi = rhs_phi(p, psi);
  };

  RiccatiSolution sol;
  sol.u = u;

  detail::GronwallTable gtab;
  if (opts.check_gronwall && !p.partition.I.empty())
    gtab = detail::GronwallTable::build(p, u, t_end, opts.gronwall_quad_steps);

  auto record = [&](double t, const CVec& psi, Complex phi) {
    CertRecord c;
    c.t = t;
    c.re_phi = phi.real();
    for (int i : p.partition.I) {
      c.max_re_psi_I = std::max(c.max_re_psi_I, psi[i].real());
      c.psi_I_norm_sq += std::norm(psi[i]);
    }
    for (int j : J) c.max_abs_re_psi_J = std::max(c.max_abs_re_psi_J, std::abs(psi[j].real()));
    double worst = std::max({c.re_phi, c.max_re_psi_I, c.max_abs_re_psi_J});
    if (opts.check_gronwall && !p.partition.I.empty()) {
      c.gronwall = gtab.bound(t);
      worst = std::max(worst, c.psi_I_norm_sq - c.gronwall);
    }
    c.violated = worst > opts.cert_tol;
    sol.grid.push_back(t);
    sol.phi.push_back(phi);
    sol.psi.push_back(psi);
    sol.certificates.push_back(c);
    if (c.violated && opts.hard_certificates)
      throw solver_error("riccati certificate violated", t, worst);
  };

  CVec psi = u;
  Complex phi{0.0, 0.0};
  record(0.0, psi, phi);
  if (t_end == 0.0) return sol;

  auto finalize_step = [&](double t_new, CVec& psi_new) {
    if (split) {
      CVec pj = psiJ_at(t_new);
      for (int j : J) psi_new[j] = pj[j];
    }
  };

  auto rk4_step = [&](double t, double h, const CVec& y, Complex f, CVec& y_out, Complex& f_out) {
    CVec k1, k2, k3, k4;
    Complex l1, l2, l3, l4;
    field(t, y, k1, l1);
    field(t + 0.5 * h, y + 0.5 * h * k1, k2, l2);
    field(t + 0.5 * h, y + 0.5 * h * k2, k3, l3);
    field(t + h, y + h * k3, k4, l4);
    y_out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    f_out = f + (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
  };

  if (opts.method == RiccatiMethod::RK4Fixed) {
    long n_steps = static_cast<long>(std::ceil(t_end / opts.dt - 1e-12));
    if (n_steps < 1) n_steps = 1;
    double h = t_end / static_cast<double>(n_steps);
    double t = 0.0;
    for (long s = 0; s < n_steps; ++s) {
      CVec psi_new;
      Complex phi_new;
      rk4_step(t, h, psi, phi, psi_new, phi_new);
      t = (s + 1 == n_steps) ? t_end : t + h;
      finalize_step(t, psi_new);
      psi = psi_new;
      phi = phi_new;
      record(t, psi, phi);
      if (!psi.allFinite()) throw solver_error("riccati state diverged", t, psi.cwiseAbs().maxCoeff());
    }
    return sol;
  }

  // Dormand-Prince 5(4) embedded pair, phi carried as an extra coordinate
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                      b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  double t = 0.0;
  double h = std::min(opts.dt, t_end);
  long steps = 0;
  CVec k1(p.n()), k2, k3, k4, k5, k6, k7;
  Complex l1, l2, l3, l4, l5, l6, l7;
  field(t, psi, k1, l1);
  while (t < t_end) {
    if (++steps > opts.max_steps) throw solver_error("riccati step budget exhausted", t, h);
    if (t + h > t_end) h = t_end - t;
    field(t + c2 * h, psi + h * (a21 * k1), k2, l2);
    field(t + c3 * h, psi + h * (a31 * k1 + a32 * k2), k3, l3);
    field(t + c4 * h, psi + h * (a41 * k1 + a42 * k2 + a43 * k3), k4, l4);
    field(t + c5 * h, psi + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5, l5);
    field(t + h, psi + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), k6, l6);
    CVec psi5 = psi + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Complex phi5 = phi + h * (b1 * l1 + b3 * l3 + b4 * l4 + b5 * l5 + b6 * l6);
    field(t + h, psi5, k7, l7);
    CVec err_psi = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    Complex err_phi = h * (e1 * l1 + e3 * l3 + e4 * l4 + e5 * l5 + e6 * l6 + e7 * l7);

    double err = 0.0;
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
      double sc = opts.atol + opts.rtol * std::max(std::abs(psi[i]), std::abs(psi5[i]));
      err = std::max(err, std::abs(err_psi[i]) / sc);
    }
    {
      double sc = opts.atol + opts.rtol * std::max(std::abs(phi), std::abs(phi5));
      err = std::max(err, std::abs(err_phi) / sc);
    }
    if (!psi5.allFinite() || !std::isfinite(err))
      throw solver_error("riccati state diverged", t, h);

    if (err <= 1.0) {
      t += h;
      finalize_step(t, psi5);
      psi = psi5;
      phi = phi5;
      field(t, psi, k1, l1);  // first-same-as-last does not survive the J overwrite
      record(t, psi, phi);
    }
    double fac = 0.9 * std::pow(std::max(err, 1e-16), -0.2);
    h *= std::min(5.0, std::max(0.2, fac));
    if (h < 1e-14 * std::max(1.0, t_end))
      throw solver_error("riccati step underflow (stiffness)", t, h);
  }
  return sol;
}

struct SemiflowReport {
  double psi_residual = 0.0;
  double phi_residual = 0.0;
};

/// Composition residuals: psi(s+t, u) vs psi(s, psi(t, u)) and
/// phi(s+t, u) vs phi(t, u) + phi(s, psi(t, u)).
inline SemiflowReport semiflow_check(const AffineParams& p, const CVec& u, double s, double t,
                                     const SolverOpts& opts = {}) {
  RiccatiSolution whole = solve_riccati(p, u, s + t, opts);
  RiccatiSolution first = solve_riccati(p, u, t, opts);
  RiccatiSolution second = solve_riccati(p, first.psi_end(), s, opts);
  SemiflowReport rep;
  rep.psi_residual = (whole.psi_end() - second.psi_end()).norm();
  rep.phi_residual = std::abs(whole.phi_end() - (first.phi_end() + second.phi_end()));
  return rep;
}

}  // namespace affine_hilbert
