#pragma once

// Shared test helpers: random admissible parameter sets, random points of
// the transform domain, and a scalar RK4 reference integrator used as an
// independent oracle.

#include "affine_hilbert/core.hpp"
#include "affine_hilbert/params.hpp"

#include <functional>
#include <random>

namespace test_support {

using namespace affine_hilbert;

/// Random admissible paired-coordinate parameter set: nI cone coordinates,
/// each driving itself and one free partner, plus a free-free drift block
/// and a PSD constant volatility on the free block.
inline AffineParams random_admissible(int nI, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> nd;
  const int n = 2 * nI;
  std::vector<int> cone(static_cast<std::size_t>(nI));
  for (int i = 0; i < nI; ++i) cone[static_cast<std::size_t>(i)] = i;
  AffineParams p;
  p.partition = IndexPartition::from_cone(n, std::move(cone));
  p.m0 = RVec::Zero(n);
  p.M = RMat::Zero(n, n);
  p.n0 = RMat::Zero(n, n);
  p.nk.assign(static_cast<std::size_t>(n), RMat());
  p.sigma_w_diag = RVec::Ones(n);

  for (int i = 0; i < nI; ++i) {
    int tau = nI + i;
    double lam = 0.2 + 1.5 * u01(gen);
    double kap = lam * u01(gen);
    p.m0[i] = u01(gen);
    p.m0[tau] = nd(gen);
    RMat ni = RMat::Zero(n, n);
    ni(i, i) = lam;
    ni(i, tau) = kap;
    ni(tau, i) = kap;
    ni(tau, tau) = lam;
    p.nk[static_cast<std::size_t>(i)] = std::move(ni);
    // cone drift: negative diagonal, nonnegative off-diagonal couplings
    p.M(i, i) = -0.5 - u01(gen);
    for (int k = 0; k < nI; ++k)
      if (k != i) p.M(k, i) = 0.2 * u01(gen);
    // cone coordinates may drive the free block arbitrarily
    for (int j = nI; j < n; ++j) p.M(j, i) = 0.5 * nd(gen);
  }
  // free-free drift block
  for (int j = nI; j < n; ++j)
    for (int k = nI; k < n; ++k) p.M(j, k) = (j == k ? -0.5 : 0.0) + 0.3 * nd(gen);
  // PSD free-block constant volatility
  RMat G(nI, nI);
  for (int r = 0; r < nI; ++r)
    for (int c = 0; c < nI; ++c) G(r, c) = 0.5 * nd(gen);
  RMat JJ = G * G.transpose();
  for (int r = 0; r < nI; ++r)
    for (int c = 0; c < nI; ++c) p.n0(nI + r, nI + c) = JJ(r, c);
  return p;
}

/// Random point of the transform domain: negative reals (plus imaginary
/// noise) on the cone, purely imaginary on the free block.
inline CVec random_u(const AffineParams& p, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> nd;
  CVec u = CVec::Zero(p.n());
  for (int i : p.partition.I) u[i] = Complex(-0.1 - 2.0 * u01(gen), nd(gen));
  for (int j : p.partition.J) u[j] = Complex(0.0, nd(gen));
  return u;
}

/// Classic fixed-step RK4 on a scalar real ODE; the reference oracle for
/// closed-form solution values.
inline double rk4_scalar(const std::function<double(double, double)>& f, double y0, double t_end,
                         double dt) {
  double t = 0.0, y = y0;
  long n = static_cast<long>(std::llround(t_end / dt));
  double h = t_end / static_cast<double>(n);
  for (long s = 0; s < n; ++s) {
    double k1 = f(t, y);
    double k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    double k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    double k4 = f(t + h, y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
  }
  return y;
}

}  // namespace test_support
