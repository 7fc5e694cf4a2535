#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "affine_hilbert/core.hpp"

#include <random>

using namespace affine_hilbert;

TEST_CASE("index partition construction") {
  auto p = IndexPartition::from_cone(4, {0, 2});
  CHECK(p.n == 4);
  CHECK(p.I == std::vector<int>{0, 2});
  CHECK(p.J == std::vector<int>{1, 3});

  auto all = IndexPartition::all_cone(3);
  CHECK(all.I.size() == 3);
  CHECK(all.J.empty());

  auto none = IndexPartition::all_free(3);
  CHECK(none.I.empty());
  CHECK(none.J.size() == 3);

  CHECK_THROWS_AS(IndexPartition::from_cone(2, {5}), std::invalid_argument);
  CHECK_THROWS_AS(IndexPartition::from_cone(2, {0, 0}), std::invalid_argument);
}

TEST_CASE("projection is idempotent and the partition sums to the identity") {
  std::mt19937_64 gen(42);
  std::normal_distribution<double> nd;
  auto p = IndexPartition::from_cone(6, {1, 3, 4});
  for (int rep = 0; rep < 50; ++rep) {
    RVec x(6);
    for (int k = 0; k < 6; ++k) x[k] = nd(gen);
    RVec pi = project(x, p.I);
    RVec pj = project(x, p.J);
    CHECK((project(pi, p.I) - pi).norm() == 0.0);
    CHECK((pi + pj - x).norm() == 0.0);
    for (int j : p.J) CHECK(pi[j] == 0.0);
  }
}

TEST_CASE("block equals projector sandwich") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  auto p = IndexPartition::from_cone(5, {0, 2});
  RMat A(5, 5);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) A(r, c) = nd(gen);
  RMat PI = RMat::Zero(5, 5), PJ = RMat::Zero(5, 5);
  for (int i : p.I) PI(i, i) = 1.0;
  for (int j : p.J) PJ(j, j) = 1.0;
  CHECK((block(A, p.I, p.J) - PI * A * PJ).cwiseAbs().maxCoeff() == 0.0);
  CHECK((block(A, p.J, p.I) - PJ * A * PI).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bilinear pairing against the hermitian inner product") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 50; ++rep) {
    CVec a(4), b(4);
    for (int k = 0; k < 4; ++k) {
      a[k] = Complex(nd(gen), nd(gen));
      b[k] = Complex(nd(gen), nd(gen));
    }
    CVec bconj = b.conjugate();
    Complex lhs = cpair(a, b);
    Complex rhs = hermitian_inner(a, bconj);
    CHECK(std::abs(lhs - rhs) < 1e-14);
  }
  CVec a(2), b(2);
  a << Complex(1, 2), Complex(0, -1);
  b << Complex(3, 0), Complex(2, 2);
  Complex expect = Complex(1, 2) * Complex(3, 0) + Complex(0, -1) * Complex(2, 2);
  CHECK(std::abs(cpair(a, b) - expect) < 1e-15);
}

TEST_CASE("membership in the transform domain") {
  auto p = IndexPartition::from_cone(3, {0});
  CVec u(3);
  u << Complex(-1, 5), Complex(0, 2), Complex(0, -3);
  CHECK(in_U(u, p));
  u[0] = Complex(0.5, 0.0);
  CHECK(!in_U(u, p));
  u[0] = Complex(-0.5, 0.0);
  u[1] = Complex(1e-6, 0.0);
  CHECK(!in_U(u, p));
  CHECK(in_U(u, p, 1e-5));
}

TEST_CASE("spectral norm and trace on known matrices") {
  RMat A(2, 2);
  A << 3, 0, 0, -4;
  CHECK(trace(A) == doctest::Approx(-1.0));
  CHECK(spectral_norm(A) == doctest::Approx(4.0));
  RMat B(2, 2);
  B << 0, 1, 0, 0;
  CHECK(spectral_norm(B) == doctest::Approx(1.0));
  CHECK(asymmetry(B) == doctest::Approx(1.0));
  CHECK(asymmetry(A) == 0.0);
}

TEST_CASE("psd check accepts gram matrices and rejects indefinite ones") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 100; ++rep) {
    RMat G(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) G(r, c) = nd(gen);
    RMat A = G * G.transpose();
    CHECK(psd_check(A));
    RMat R = psd_sqrt(A);
    CHECK((R * R - A).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(asymmetry(R) < 1e-12);
  }
  RMat ind(2, 2);
  ind << 1, 0, 0, -1;
  CHECK(!psd_check(ind));
  CHECK_THROWS_AS(psd_sqrt(ind), std::domain_error);
  CHECK(min_eigenvalue(ind) == doctest::Approx(-1.0));
}

TEST_CASE("psd sqrt clamps tiny negative eigenvalues") {
  RMat A(2, 2);
  A << 1.0, 1.0, 1.0, 1.0 - 1e-12;
  RMat R = psd_sqrt(A, 1e-10);
  CHECK((R * R - A).cwiseAbs().maxCoeff() < 1e-6);
}
