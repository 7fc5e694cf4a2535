#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "affine_hilbert/families.hpp"
#include "affine_hilbert/riccati.hpp"
#include "support.hpp"

#include <random>

using namespace affine_hilbert;

namespace {

// closed form of the scalar cone equation dpsi = rho psi + (lambda/2) psi^2
double scalar_cone_closed(double u, double rho, double lambda, double t) {
  double e = std::exp(rho * t);
  return rho * u * e / (rho - 0.5 * lambda * u * (e - 1.0));
}

AffineParams scalar_cone(double rho, double lambda) {
  AffineParams p;
  p.partition = IndexPartition::all_cone(1);
  p.m0 = RVec::Zero(1);
  p.M = RMat::Constant(1, 1, rho);
  p.n0 = RMat::Zero(1, 1);
  p.nk = {RMat::Constant(1, 1, lambda)};
  p.sigma_w_diag = RVec::Ones(1);
  return p;
}

}  // namespace

TEST_CASE("scalar closed form validated against a fine RK4 oracle") {
  double oracle = test_support::rk4_scalar(
      [](double, double y) { return -y + y * y; }, -1.0, 1.0, 1e-6);
  CHECK(std::abs(scalar_cone_closed(-1.0, -1.0, 2.0, 1.0) - oracle) < 1e-10);
  CHECK(oracle == doctest::Approx(-0.225403).epsilon(1e-4));
}

TEST_CASE("psi field: scalar cone value and the linear case") {
  AffineParams p = scalar_cone(-0.5, 2.0);
  CVec psi(1);
  psi << Complex(-1.0, 0.0);
  CVec r = rhs_psi(p, psi);
  CHECK(r[0].real() == doctest::Approx(1.5));  // 0.5 + 1
  CHECK(r[0].imag() == doctest::Approx(0.0));

  // all n_k = 0: field reduces to M^T psi
  FamilySpec os;
  os.family = FamilyKind::OU;
  os.n = 3;
  AffineParams ou = make_ou(os);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  CVec v(3);
  for (int k = 0; k < 3; ++k) v[k] = Complex(nd(gen), nd(gen));
  CVec lin = ou.M.transpose() * v.real() + Complex(0, 1) * (ou.M.transpose() * v.imag());
  CHECK((rhs_psi(ou, v) - lin).norm() < 1e-14);

  CHECK(rhs_psi(p, CVec::Zero(1)).norm() == 0.0);
}

TEST_CASE("psi field agrees with the semilinear form on random inputs") {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 50; ++rep) {
    AffineParams p = test_support::random_admissible(3, gen);
    CVec psi(p.n());
    for (int k = 0; k < p.n(); ++k) psi[k] = Complex(nd(gen), nd(gen));
    CHECK((rhs_psi(p, psi) - rhs_psi_semilinear(p, psi)).norm() < 1e-13);
  }
}

TEST_CASE("phi field examples") {
  AffineParams p = scalar_cone(-1.0, 2.0);
  CHECK(std::abs(rhs_phi(p, CVec::Zero(1))) == 0.0);

  AffineParams q;
  q.partition = IndexPartition::all_free(2);
  q.m0 = RVec::Zero(2);
  q.m0 << 1.0, 0.0;
  q.M = RMat::Zero(2, 2);
  q.n0 = RMat::Zero(2, 2);
  q.nk = {RMat(), RMat()};
  q.sigma_w_diag = RVec::Ones(2);
  CVec psi(2);
  psi << Complex(-2.0, 1.0), Complex(0.0, 5.0);
  CHECK(std::abs(rhs_phi(q, psi) - Complex(-2.0, 1.0)) < 1e-15);
}

TEST_CASE("free-block closed form") {
  FamilySpec os;
  os.family = FamilyKind::OU;
  os.n = 3;
  AffineParams ou = make_ou(os);
  CVec u(3);
  u << Complex(0, 1), Complex(0, -2), Complex(0, 0.5);
  CHECK((psi_J_closed(ou, u, 0.0) - u).norm() < 1e-15);
  // diagonal drift: coordinates scale by exp(rho_j t)
  CVec at1 = psi_J_closed(ou, u, 1.0);
  for (int j = 0; j < 3; ++j) {
    Complex expect = std::exp(ou.M(j, j) * 1.0) * u[j];
    CHECK(std::abs(at1[j] - expect) < 1e-12);
    CHECK(std::abs(at1[j].real()) < 1e-14);  // imaginary axis preserved
  }
  AffineParams flat = ou;
  flat.M = RMat::Zero(3, 3);
  CHECK((psi_J_closed(flat, u, 7.3) - u).norm() < 1e-14);
}

TEST_CASE("solver reproduces the linear closed form on a free-block model") {
  FamilySpec os;
  os.family = FamilyKind::OU;
  os.n = 4;
  AffineParams ou = make_ou(os);
  CVec u(4);
  u << Complex(0, 0.3), Complex(0, -1.2), Complex(0, 2.0), Complex(0, -0.4);
  for (bool full : {false, true}) {
    SolverOpts opts;
    opts.full_system = full;
    if (full) opts.atol = opts.rtol = 1e-12;  // the split mode is exact here
    RiccatiSolution sol = solve_riccati(ou, u, 1.5, opts);
    CHECK((sol.psi_end() - psi_J_closed(ou, u, 1.5)).norm() < 1e-10);
  }
}

TEST_CASE("solver matches the scalar cone closed form") {
  AffineParams p = scalar_cone(-1.0, 2.0);
  CVec u(1);
  u << Complex(-1.0, 0.0);
  SUBCASE("adaptive") {
    RiccatiSolution sol = solve_riccati(p, u, 1.0);
    CHECK(std::abs(sol.psi_end()[0] - Complex(scalar_cone_closed(-1, -1, 2, 1), 0)) < 1e-8);
    CHECK(std::abs(sol.phi[0]) == 0.0);       // normalization
    CHECK((sol.psi[0] - u).norm() == 0.0);
  }
  SUBCASE("fixed step") {
    SolverOpts opts;
    opts.method = RiccatiMethod::RK4Fixed;
    opts.dt = 1e-3;
    RiccatiSolution sol = solve_riccati(p, u, 1.0, opts);
    CHECK(std::abs(sol.psi_end()[0] - Complex(scalar_cone_closed(-1, -1, 2, 1), 0)) < 1e-10);
  }
}

TEST_CASE("zero initial condition stays at the origin") {
  AffineParams p = scalar_cone(-1.0, 2.0);
  RiccatiSolution sol = solve_riccati(p, CVec::Zero(1), 1.0);
  CHECK(std::abs(sol.phi_end()) == 0.0);
  CHECK(sol.psi_end().norm() == 0.0);
}

TEST_CASE("solver rejects points outside the domain") {
  AffineParams p = scalar_cone(-1.0, 2.0);
  CVec bad(1);
  bad << Complex(0.5, 0.0);
  CHECK_THROWS_AS(solve_riccati(p, bad, 1.0), std::domain_error);
}

TEST_CASE("fourth-order convergence of the fixed-step scheme") {
  AffineParams p = scalar_cone(-1.0, 2.0);
  CVec u(1);
  u << Complex(-1.0, 0.0);
  double exact = scalar_cone_closed(-1, -1, 2, 1);
  std::vector<double> errs;
  for (double dt : {0.1, 0.05, 0.025, 0.0125}) {
    SolverOpts opts;
    opts.method = RiccatiMethod::RK4Fixed;
    opts.dt = dt;
    RiccatiSolution sol = solve_riccati(p, u, 1.0, opts);
    errs.push_back(std::abs(sol.psi_end()[0].real() - exact));
  }
  for (std::size_t k = 1; k < errs.size(); ++k) {
    double ratio = errs[k - 1] / errs[k];
    CHECK(ratio > 10.0);
    CHECK(ratio < 22.0);
  }
}

TEST_CASE("comparison solution of the scalar bound equation") {
  CHECK(scalar_riccati(-1.0, 0.0, 5.0) == doctest::Approx(-1.0));
  CHECK(std::abs(scalar_riccati(-1e-9, 0.5, 1.0)) < 1e-8);
  double oracle = test_support::rk4_scalar(
      [](double, double g) { return 0.5 * (g * g - 2.0 * g); }, -1.0, 1.0, 1e-6);
  CHECK(std::abs(scalar_riccati(-1.0, 0.5, 1.0) - oracle) < 1e-10);
  CHECK(oracle == doctest::Approx(-0.27953).epsilon(1e-4));
  CHECK_THROWS_AS(scalar_riccati(0.5, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("growth bound: closed form when the free block is silent") {
  AffineParams p = scalar_cone(-1.0, 2.0);
  CVec u(1);
  u << Complex(-1.0, 0.0);
  // C = ||n_1||^2 + ||M||^2 + 7/2 = 4 + 1 + 3.5
  double C = 8.5;
  double closed = 1.0 + 2.0 * std::expm1(C * 0.1);
  CHECK(closed == doctest::Approx(3.679).epsilon(1e-3));
  CHECK(gronwall_bound(p, u, 0.1) == doctest::Approx(closed).epsilon(1e-8));
  CHECK(gronwall_bound(p, CVec::Zero(1), 0.0) == 0.0);
}

TEST_CASE("growth bound quadrature is stable in the step count") {
  std::mt19937_64 gen(23);
  AffineParams p = test_support::random_admissible(2, gen);
  CVec u = test_support::random_u(p, gen);
  double coarse = gronwall_bound(p, u, 0.5, 128);
  double fine = gronwall_bound(p, u, 0.5, 2048);
  CHECK(coarse == doctest::Approx(fine).epsilon(1e-6));
}

TEST_CASE("semiflow composition residuals") {
  AffineParams p = scalar_cone(-1.0, 2.0);
  CVec u(1);
  u << Complex(-1.0, 0.0);
  SolverOpts opts;
  opts.method = RiccatiMethod::RK4Fixed;
  opts.dt = 1e-4;
  SUBCASE("degenerate splits vanish") {
    auto r0 = semiflow_check(p, u, 0.0, 1.0, opts);
    CHECK(r0.psi_residual < 1e-12);
    CHECK(r0.phi_residual < 1e-12);
  }
  SUBCASE("half-and-half split") {
    auto r = semiflow_check(p, u, 0.5, 0.5, opts);
    CHECK(r.psi_residual < 1e-8);
    CHECK(r.phi_residual < 1e-8);
  }
  SUBCASE("coupled model") {
    std::mt19937_64 gen(31);
    AffineParams q = test_support::random_admissible(2, gen);
    CVec v = test_support::random_u(q, gen);
    auto r = semiflow_check(q, v, 0.3, 0.4);
    CHECK(r.psi_residual < 1e-6);
    CHECK(r.phi_residual < 1e-6);
  }
}

TEST_CASE("domain invariance, comparison and growth certificates on a random battery") {
  std::mt19937_64 gen(77);
  for (int rep = 0; rep < 20; ++rep) {
    AffineParams p = test_support::random_admissible(1 + rep % 4, gen);
    REQUIRE(check_admissibility(p).overall);
    CVec u = test_support::random_u(p, gen);
    RiccatiSolution sol = solve_riccati(p, u, 1.0);  // throws on any violation
    for (const CertRecord& c : sol.certificates) {
      CHECK(c.re_phi <= 1e-8);
      CHECK(c.max_re_psi_I <= 1e-8);
      CHECK(c.max_abs_re_psi_J <= 1e-8);
      CHECK(c.psi_I_norm_sq <= c.gronwall + 1e-8);
    }
    // independent growth-bound evaluation at the terminal time
    CHECK(sol.certificates.back().psi_I_norm_sq <= gronwall_bound(p, u, 1.0) + 1e-6);
  }
}

TEST_CASE("scalar comparison certificate in one dimension") {
  AffineParams p = scalar_cone(-1.0, 2.0);
  double C1 = 0.5 * std::max(2.0, 1.0);  // half of max(n_11, |m_11|)
  for (double u0 : {-0.25, -1.0, -4.0}) {
    CVec u(1);
    u << Complex(u0, 0.0);
    RiccatiSolution sol = solve_riccati(p, u, 1.0);
    for (std::size_t m = 0; m < sol.grid.size(); ++m)
      CHECK(sol.psi[m][0].real() <= scalar_riccati(u0, C1, sol.grid[m]) + 1e-8);
  }
}

TEST_CASE("split and full-system modes agree on coupled models") {
  std::mt19937_64 gen(41);
  AffineParams p = test_support::random_admissible(3, gen);
  CVec u = test_support::random_u(p, gen);
  SolverOpts split, full;
  full.full_system = true;
  RiccatiSolution a = solve_riccati(p, u, 0.8, split);
  RiccatiSolution b = solve_riccati(p, u, 0.8, full);
  CHECK((a.psi_end() - b.psi_end()).norm() < 1e-7);
  CHECK(std::abs(a.phi_end() - b.phi_end()) < 1e-7);
}
