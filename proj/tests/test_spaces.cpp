// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include "curleq/fe_space.hpp"

#include <cmath>
#include <random>

using namespace curleq;

namespace {

// Max trace jump across interior faces for a random coefficient vector:
// tangential for Nedelec, normal for Raviart-Thomas, value for Lagrange.
double max_interior_jump(const TetMesh& mesh, const FeSpace& space,
                         const CoefficientField& field) {
  QuadratureRule tri = gauss_rule_triangle(4);
  double worst = 0.0;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& face = mesh.faces[f];
    if (face.on_boundary()) continue;
    Eigen::Matrix3d corners;
    for (int i = 0; i < 3; ++i) corners.col(i) = mesh.vertices[face.v[i]];
    MappedRule mr = map_to_triangle(tri, corners);
    Vec3 n = (corners.col(1) - corners.col(0)).cross(corners.col(2) - corners.col(0)).normalized();
    if (space.kind == SpaceKind::Lagrange) {
      Eigen::VectorXd a = field.scalar_values(face.owner, mr.points);
      Eigen::VectorXd b = field.scalar_values(face.neighbor, mr.points);
      worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    } else {
      Eigen::Matrix3Xd a = field.values(face.owner, mr.points);
      Eigen::Matrix3Xd b = field.values(face.neighbor, mr.points);
      Eigen::Matrix3Xd d = a - b;
      for (int q = 0; q < d.cols(); ++q) {
        Vec3 jump = d.col(q);
        if (space.kind == SpaceKind::Nedelec)
          worst = std::max(worst, jump.cross(n).norm()); // tangential
        else
          worst = std::max(worst, std::abs(jump.dot(n))); // normal
      }
    }
  }
  return worst;
}

// Max constrained-trace magnitude over boundary faces with the given tag.
double max_boundary_trace(const TetMesh& mesh, const FeSpace& space,
                          const CoefficientField& field, BoundaryTag tag) {
  QuadratureRule tri = gauss_rule_triangle(4);
  double worst = 0.0;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& face = mesh.faces[f];
    if (!face.on_boundary() || face.tag != static_cast<int>(tag)) continue;
    Eigen::Matrix3d corners;
    for (int i = 0; i < 3; ++i) corners.col(i) = mesh.vertices[face.v[i]];
    MappedRule mr = map_to_triangle(tri, corners);
    Vec3 n = (corners.col(1) - corners.col(0)).cross(corners.col(2) - corners.col(0)).normalized();
    if (space.kind == SpaceKind::Lagrange) {
      worst = std::max(worst, field.scalar_values(face.owner, mr.points).cwiseAbs().maxCoeff());
    } else {
      Eigen::Matrix3Xd a = field.values(face.owner, mr.points);
      for (int q = 0; q < a.cols(); ++q) {
        if (space.kind == SpaceKind::Nedelec)
          worst = std::max(worst, a.col(q).cross(n).norm());
        else
          worst = std::max(worst, std::abs(a.col(q).dot(n)));
      }
    }
  }
  return worst;
}

} // namespace

TEST_CASE("trace continuity and boundary masks for all kinds") {
  TetMesh mesh = build_structured_cube_mesh(1);
  ShapeRegistry reg(mesh);
  std::mt19937 rng(3);
  std::normal_distribution<double> dist;

  struct Config {
    SpaceKind kind;
    int degree;
  };
  for (Config c : {Config{SpaceKind::Nedelec, 0}, Config{SpaceKind::Nedelec, 2},
                   Config{SpaceKind::RaviartThomas, 1}, Config{SpaceKind::RaviartThomas, 2},
                   Config{SpaceKind::Lagrange, 2}, Config{SpaceKind::Lagrange, 3}}) {
    FeSpace sp = build_space_bc(mesh, c.kind, c.degree, reg, BoundaryTag::Dirichlet);
    CoefficientField f(sp);
    for (int i = 0; i < f.coeffs.size(); ++i) f.coeffs(i) = dist(rng);
    double mag = f.coeffs.cwiseAbs().maxCoeff();
    CHECK(max_interior_jump(mesh, sp, f) < 1e-10 * std::max(1.0, mag));
    CHECK(max_boundary_trace(mesh, sp, f, BoundaryTag::Dirichlet) < 1e-10 * std::max(1.0, mag));
  }
}

TEST_CASE("free DOF counts") {
  TetMesh mesh = build_structured_cube_mesh(1);
  ShapeRegistry reg(mesh);

  // ND_0 with the whole boundary constrained: one DOF per interior edge.
  FeSpace nd0 = build_space_bc(mesh, SpaceKind::Nedelec, 0, reg, BoundaryTag::Dirichlet);
  int interior_edges = 0;
  {
    std::vector<bool> on_bnd(mesh.n_edges(), false);
    for (const auto& f : mesh.faces)
      if (f.on_boundary())
        for (int e = 0; e < 3; ++e) {
          std::array<int, 2> key{f.v[e], f.v[(e + 1) % 3]};
          if (key[0] > key[1]) std::swap(key[0], key[1]);
          on_bnd[mesh.edge_index.at(key)] = true;
        }
    for (int e = 0; e < mesh.n_edges(); ++e)
      if (!on_bnd[e]) ++interior_edges;
  }
  CHECK(nd0.n_free == interior_edges);

  // Unconstrained RT_0 on a single tet: 4 DOFs (one per face).
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  TetMesh single = finalize_mesh(v, {{0, 1, 2, 3}}, nullptr);
  ShapeRegistry reg1(single);
  FeSpace rt0 = build_space_bc(single, SpaceKind::RaviartThomas, 0, reg1, std::nullopt);
  CHECK(rt0.n_free == 4);

  // Total DOF identity without constraints.
  FeSpace nd2 = build_space_bc(mesh, SpaceKind::Nedelec, 2, reg, std::nullopt);
  CHECK(nd2.n_free == 3 * mesh.n_edges() + 6 * mesh.n_faces() + 3 * mesh.n_tets());
}

TEST_CASE("degree cap is enforced") {
  TetMesh mesh = build_structured_cube_mesh(1);
  ShapeRegistry reg(mesh);
  CHECK_THROWS_AS(build_space_bc(mesh, SpaceKind::Nedelec, 5, reg, std::nullopt),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_space_bc(mesh, SpaceKind::Lagrange, 6, reg, std::nullopt),
                  std::invalid_argument);
  // Raised cap admits the reconstruction degree p+1 = 5.
  FeSpace nd5 = build_space_bc(mesh, SpaceKind::Nedelec, 5, reg, std::nullopt, 5);
  CHECK(nd5.n_free > 0);
}

TEST_CASE("patch space: boundary DOFs masked, gamma_D free") {
  TetMesh mesh = build_structured_cube_mesh(1);
  ShapeRegistry reg(mesh);

  int bary = -1;
  for (int v2 = 0; v2 < mesh.n_vertices(); ++v2)
    if (!mesh.vertex_on_boundary[v2]) bary = v2;
  VertexPatch patch = vertex_patch(mesh, bary);
  PatchSpace ps = build_patch_space(mesh, patch, SpaceKind::RaviartThomas, 1, reg);
  int interior_faces = 0;
  for (const auto& f : ps.patch->mesh.faces)
    if (!f.on_boundary()) ++interior_faces;
  CHECK(ps.space.n_free == interior_faces * 3 + ps.patch->mesh.n_tets() * 3);

  // Dirichlet-vertex patch: gamma_D faces stay free.
  int corner = 0;
  VertexPatch pc = vertex_patch(mesh, corner);
  REQUIRE(pc.kind == PatchKind::DirichletBoundary);
  PatchSpace psc = build_patch_space(mesh, pc, SpaceKind::RaviartThomas, 1, reg);
  int interior_faces_c = 0;
  for (const auto& f : psc.patch->mesh.faces)
    if (!f.on_boundary()) ++interior_faces_c;
  int gamma_d = static_cast<int>(pc.gamma_d_faces.size());
  CHECK(psc.space.n_free == (interior_faces_c + gamma_d) * 3 + psc.patch->mesh.n_tets() * 3);
}

TEST_CASE("patch field accumulates into the parent space") {
  TetMesh mesh = build_structured_cube_mesh(1);
  ShapeRegistry reg(mesh);
  int bary = -1;
  for (int v2 = 0; v2 < mesh.n_vertices(); ++v2)
    if (!mesh.vertex_on_boundary[v2]) bary = v2;
  VertexPatch patch = vertex_patch(mesh, bary);
  PatchSpace ps = build_patch_space(mesh, patch, SpaceKind::Nedelec, 1, reg);
  FeSpace global = build_space_bc(mesh, SpaceKind::Nedelec, 1, reg, std::nullopt);

  Eigen::VectorXd local = Eigen::VectorXd::Random(ps.space.n_free);
  CoefficientField combined(global);
  accumulate_patch_field(ps, local, global, combined.coeffs);

  CoefficientField plocal(ps.space);
  plocal.coeffs = local;
  Eigen::Matrix3Xd pts(3, 4);
  for (int i = 0; i < 4; ++i) pts.col(i) = ps.patch->mesh.tet_centroid(0) * (0.8 + 0.05 * i);
  Eigen::Matrix3Xd a = plocal.values(0, pts);
  Eigen::Matrix3Xd b = combined.values(ps.patch->parent_tet[0], pts);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mass matrix is SPD and integrates constants") {
  TetMesh mesh = build_structured_cube_mesh(1);
  ShapeRegistry reg(mesh);
  FeSpace rt1 = build_space_bc(mesh, SpaceKind::RaviartThomas, 1, reg, std::nullopt);
  auto M = assemble_mass(rt1, 6);
  Eigen::VectorXd x = Eigen::VectorXd::Random(rt1.n_free);
  CHECK(x.dot(M * x) > 0.0);

  // Interpolate v = (1,0,0): the energy equals |Omega| = 1.
  CoefficientField c(rt1);
  for (int t = 0; t < mesh.n_tets(); ++t) {
    Eigen::VectorXd dofs = rt1.shapes[t]->apply_dofs(
        [](const Vec3&) { return Vec3(1, 0, 0); }, 4);
    const auto& gd = rt1.element_dofs[t];
    for (size_t k = 0; k < gd.size(); ++k)
      if (gd[k] >= 0) c.coeffs(gd[k]) = dofs(k);
  }
  CHECK(c.coeffs.dot(M * c.coeffs) == doctest::Approx(1.0).epsilon(1e-12));
}
