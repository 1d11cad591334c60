// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include "curleq/polynomial.hpp"
#include "curleq/quadrature.hpp"

#include <cmath>
#include <random>

using namespace curleq;

namespace {

// Exact integral of x^i y^j z^k over the unit tetrahedron:
// i! j! k! / (i+j+k+3)!.
double tet_monomial_integral(int i, int j, int k) {
  auto fact = [](int n) {
    double f = 1.0;
    for (int m = 2; m <= n; ++m) f *= m;
    return f;
  };
  return fact(i) * fact(j) * fact(k) / fact(i + j + k + 3);
}

} // namespace

TEST_CASE("tet rule: weights sum to the reference measure") {
  for (int e : {0, 1, 2, 5, 8, 14, 20}) {
    auto r = gauss_rule_tet(e);
    CHECK(std::abs(r.weights.sum() - 1.0 / 6.0) < 1e-14);
  }
}

TEST_CASE("tet rule: exactness 0 is the barycenter point") {
  auto r = gauss_rule_tet(0);
  REQUIRE(r.size() == 1);
  CHECK(r.points(0, 0) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(r.points(0, 1) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(r.points(0, 2) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(r.weights(0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("tet rule: integrates monomials to analytic values") {
  for (int e : {2, 5, 9, 14}) {
    auto r = gauss_rule_tet(e);
    for (int i = 0; i + 0 <= e; ++i)
      for (int j = 0; i + j <= e; ++j)
        for (int k = 0; i + j + k <= e; ++k) {
          double s = 0.0;
          for (int q = 0; q < r.size(); ++q)
            s += r.weights(q) * std::pow(r.points(q, 0), i) * std::pow(r.points(q, 1), j) *
                 std::pow(r.points(q, 2), k);
          CHECK(std::abs(s - tet_monomial_integral(i, j, k)) < 1e-13);
        }
  }
}

TEST_CASE("tet rule: x^2 over the reference tet is 1/60") {
  auto r = gauss_rule_tet(2);
  double s = 0.0;
  for (int q = 0; q < r.size(); ++q) s += r.weights(q) * r.points(q, 0) * r.points(q, 0);
  CHECK(std::abs(s - 1.0 / 60.0) < 1e-14);
}

TEST_CASE("unsupported exactness is rejected") {
  CHECK_THROWS_AS(gauss_rule_tet(99), std::invalid_argument);
  CHECK_THROWS_AS(gauss_rule_tet(-1), std::invalid_argument);
  CHECK(max_quadrature_exactness() >= 14);
}

TEST_CASE("triangle rule: monomial integrals") {
  // int_T u^i v^j = i! j! / (i+j+2)!
  auto fact = [](int n) {
    double f = 1.0;
    for (int m = 2; m <= n; ++m) f *= m;
    return f;
  };
  auto r = gauss_rule_triangle(7);
  CHECK(std::abs(r.weights.sum() - 0.5) < 1e-14);
  for (int i = 0; i <= 7; ++i)
    for (int j = 0; i + j <= 7; ++j) {
      double s = 0.0;
      for (int q = 0; q < r.size(); ++q)
        s += r.weights(q) * std::pow(r.points(q, 0), i) * std::pow(r.points(q, 1), j);
      CHECK(std::abs(s - fact(i) * fact(j) / fact(i + j + 2)) < 1e-14);
    }
}

TEST_CASE("segment rule: Legendre exactness") {
  auto r = gauss_rule_segment(9);
  for (int i = 0; i <= 9; ++i) {
    double s = 0.0;
    for (int q = 0; q < r.size(); ++q) s += r.weights(q) * std::pow(r.points(q, 0), i);
    CHECK(std::abs(s - 1.0 / (i + 1)) < 1e-14);
  }
}

TEST_CASE("polynomial algebra: eval, product, derivative, curl") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);

  Poly x = Poly::coordinate(0), y = Poly::coordinate(1), z = Poly::coordinate(2);
  Poly p = x * x * y + z * Poly::constant(2.0) - y;
  Eigen::Vector3d pt(0.3, -0.7, 1.1);
  CHECK(p.eval(pt) == doctest::Approx(0.09 * (-0.7) + 2.2 + 0.7).epsilon(1e-14));

  Poly dp = p.derivative(0);
  CHECK(dp.eval(pt) == doctest::Approx(2 * 0.3 * (-0.7)).epsilon(1e-14));

  // curl(grad f) = 0 for a random polynomial f
  Poly f(3);
  for (int i = 0; i < Poly::space_dim(3); ++i) f.coeff_at(i) = dist(rng);
  VecPoly g = gradient(f);
  VecPoly cg = g.curl();
  for (int c = 0; c < 3; ++c)
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::Vector3d q(dist(rng), dist(rng), dist(rng));
      CHECK(std::abs(cg.comp[c].eval(q)) < 1e-12);
    }

  VecPoly v(2);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < Poly::space_dim(2); ++i) v.comp[c].coeff_at(i) = dist(rng);
  VecPoly xv = coordinate_cross(v);
  Poly div_xv = xv.divergence();
  VecPoly cv = v.curl();
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::Vector3d q(dist(rng), dist(rng), dist(rng));
    // div(x cross v) = v . curl(x) - x . curl(v) = -x . curl(v)
    double expect = -q.dot(cv.eval(q));
    CHECK(div_xv.eval(q) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("monomial index round trip") {
  for (int n = 0; n < Poly::space_dim(6); ++n) {
    auto e = Poly::monomial_exponents(n);
    CHECK(Poly::monomial_index(e[0], e[1], e[2]) == n);
  }
}
