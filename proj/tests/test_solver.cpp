// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include "curleq/cases.hpp"
#include "curleq/curl_solver.hpp"
#include "curleq/estimator.hpp"

#include <cmath>
#include <random>

using namespace curleq;

namespace {

CurrentDensity zero_current() {
  CurrentDensity j;
  j.eval = [](const Vec3&) { return Vec3::Zero(); };
  j.is_piecewise_rt = true;
  j.rt_degree = 0;
  return j;
}

// A = (f(x2,x3), 0, 0) with f = x2(1-x2) x3(1-x3): a degree-4 polynomial
// field with vanishing tangential trace on the unit cube and div A = 0.
Vec3 poly_curl(const Vec3& x) {
  return {0, x(1) * (1 - x(1)) * (1 - 2 * x(2)), -(1 - 2 * x(1)) * x(2) * (1 - x(2))};
}
CurrentDensity poly_current() {
  CurrentDensity j;
  j.eval = [](const Vec3& x) {
    return Vec3(2 * (x(2) * (1 - x(2)) + x(1) * (1 - x(1))), 0, 0);
  };
  j.is_piecewise_rt = true;
  j.rt_degree = 2;
  j.divergence = [](const Vec3&) { return 0.0; };
  return j;
}

} // namespace

TEST_CASE("zero current gives the zero potential") {
  TetMesh mesh = build_structured_cube_mesh(1);
  ShapeRegistry reg(mesh);
  auto sol = solve_magnetic_potential(mesh, reg, 1, zero_current());
  CHECK(sol.potential.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sol.multiplier_norm < 1e-12);
}

TEST_CASE("Galerkin residual of the mixed system is tiny") {
  TetMesh mesh = build_structured_cube_mesh(2);
  ShapeRegistry reg(mesh);
  auto c = make_const_j_case(20);
  auto sol = solve_magnetic_potential(mesh, reg, 1, c.current);
  CHECK(sol.galerkin_residual < 1e-10);
  CHECK(sol.multiplier_norm < 1e-8 * sol.rhs_norm);
  CHECK(!sol.compatibility_warning);
}

TEST_CASE("gradient-free polynomial case is reproduced at p = 4") {
  TetMesh mesh = build_structured_cube_mesh(1);
  ShapeRegistry reg(mesh);
  auto sol = solve_magnetic_potential(mesh, reg, 4, poly_current());
  QuadConfig quad;
  double err = exact_error(mesh, sol, poly_curl, quad);
  CHECK(err < 1e-9);

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 5; ++trial) {
    Vec3 x(u(rng), u(rng), u(rng));
    int tet = -1;
    for (int t = 0; t < mesh.n_tets() && tet < 0; ++t)
      if (mesh.barycentric(t, x).minCoeff() > -1e-12) tet = t;
    REQUIRE(tet >= 0);
    Eigen::Matrix3Xd pts(3, 1);
    pts.col(0) = x;
    CHECK((sol.curl_at(tet, pts).col(0) - poly_curl(x)).norm() < 1e-9);
  }

  // Against A_h = 0 the error is the full curl norm.
  MagneticPotentialSolution zero = solve_magnetic_potential(mesh, reg, 1, zero_current());
  double full = exact_error(mesh, zero, poly_curl, quad);
  double exact_norm = 0.0;
  QuadratureRule r = gauss_rule_tet(10);
  for (int t = 0; t < mesh.n_tets(); ++t) {
    MappedRule mr = map_to_tet(r, mesh.tet_vertices(t));
    for (int q = 0; q < mr.weights.size(); ++q)
      exact_norm += mr.weights(q) * poly_curl(mr.points.col(q)).squaredNorm();
  }
  CHECK(full == doctest::Approx(std::sqrt(exact_norm)).epsilon(1e-10));
}

TEST_CASE("sine case: error against A_h = 0 equals pi sqrt(2)") {
  TetMesh mesh = build_structured_cube_mesh(2);
  ShapeRegistry reg(mesh);
  auto c = make_sine_case();
  auto zero = solve_magnetic_potential(mesh, reg, 1, zero_current());
  QuadConfig quad;
  double err = exact_error(mesh, zero, c.exact_curl, quad);
  CHECK(err == doctest::Approx(M_PI * std::sqrt(2.0)).epsilon(1e-8));
}

TEST_CASE("patchwise orthogonality holds for the Galerkin solution") {
  TetMesh mesh = build_structured_cube_mesh(1);
  ShapeRegistry reg(mesh);
  auto c = make_const_j_case(20);
  auto sol = solve_magnetic_potential(mesh, reg, 1, c.current);
  QuadConfig quad;
  OrthogonalityReport rep = check_patch_orthogonality(mesh, sol, c.current, quad);
  CHECK(rep.max_scaled_residual <= 1e-9);

  auto zero = solve_magnetic_potential(mesh, reg, 1, zero_current());
  OrthogonalityReport rep0 = check_patch_orthogonality(mesh, zero, zero_current(), quad);
  CHECK(rep0.max_scaled_residual <= 1e-13);

  // Perturbing one coefficient breaks the identity: the check is not vacuous.
  sol.potential(sol.potential.size() / 2) += 1.0;
  OrthogonalityReport bad = check_patch_orthogonality(mesh, sol, c.current, quad);
  CHECK(bad.max_scaled_residual > 1e-3);
}

TEST_CASE("piecewise-RT data diagnostics accept the constant current") {
  TetMesh mesh = build_structured_cube_mesh(1);
  ShapeRegistry reg(mesh);
  auto c = make_const_j_case(10);
  QuadConfig quad;
  RtDataCheck check = validate_rt_current(mesh, reg, c.current, quad);
  CHECK(check.max_interpolation_error < 1e-12);
  CHECK(check.max_divergence < 1e-12);
  CHECK(check.max_normal_jump < 1e-12);
}

TEST_CASE("solver runs at p = 0") {
  TetMesh mesh = build_structured_cube_mesh(1);
  ShapeRegistry reg(mesh);
  auto c = make_const_j_case(10);
  auto sol = solve_magnetic_potential(mesh, reg, 0, c.current);
  CHECK(sol.galerkin_residual < 1e-10);
  QuadConfig quad;
  OrthogonalityReport rep = check_patch_orthogonality(mesh, sol, c.current, quad);
  CHECK(rep.max_scaled_residual <= 1e-9);
}
