// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include "curleq/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

using namespace curleq;

namespace {

// A single positively oriented tet.
TetMesh single_tet() {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  return finalize_mesh(v, {{0, 1, 2, 3}}, nullptr);
}

// Two tets sharing the face (0,1,2).
TetMesh two_tets() {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.4, 0.4, -1.0}};
  return finalize_mesh(v, {{0, 1, 2, 3}, {0, 1, 2, 4}}, nullptr);
}

Vec3 random_point_in_tet(const TetMesh& m, int t, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double a = u(rng), b = u(rng), c = u(rng);
  if (a + b + c > 1.0) { // fold back into the simplex (rough but adequate)
    a = 1.0 - a;
    b = 1.0 - b;
    c = (1.0 - c) * std::max(0.0, 1.0 - a - b);
  }
  if (a + b + c > 1.0) {
    double s = a + b + c + 0.01;
    a /= s;
    b /= s;
    c /= s;
  }
  auto tv = m.tet_vertices(t);
  return tv.col(0) + a * (tv.col(1) - tv.col(0)) + b * (tv.col(2) - tv.col(0)) +
         c * (tv.col(3) - tv.col(0));
}

} // namespace

TEST_CASE("structured mesh: N=1 counts and mesh size") {
  TetMesh m = build_structured_cube_mesh(1);
  CHECK(m.n_tets() == 24);
  CHECK(m.n_vertices() == 15);
  CHECK(m.boundary_face_count() == 24);
  CHECK(m.nominal_h == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-13));
  // True tet diameters: the cube edge is the longest edge of each tet.
  for (int t = 0; t < m.n_tets(); ++t)
    CHECK(m.h_tet[t] == doctest::Approx(1.0).epsilon(1e-13));
  // Euler characteristic of a ball: V - E + F - T = 1.
  CHECK(m.n_vertices() - m.n_edges() + m.n_faces() - m.n_tets() == 1);
}

TEST_CASE("structured mesh: counts for N=2,3 and volume sum") {
  for (int N : {1, 2, 3}) {
    TetMesh m = build_structured_cube_mesh(N);
    CHECK(m.n_tets() == 24 * N * N * N);
    int expected_vertices = (N + 1) * (N + 1) * (N + 1) + 3 * N * N * (N + 1) + N * N * N;
    CHECK(m.n_vertices() == expected_vertices);
    CHECK(m.n_vertices() - m.n_edges() + m.n_faces() - m.n_tets() == 1);
    double vol = 0.0;
    for (int t = 0; t < m.n_tets(); ++t) vol += m.volume[t];
    CHECK(std::abs(vol - 1.0) < 1e-12);
    CHECK(m.shape_regularity < 20.0);
  }
}

TEST_CASE("structured mesh: invalid N rejected") {
  CHECK_THROWS_AS(build_structured_cube_mesh(0), std::invalid_argument);
}

TEST_CASE("interior faces have an owner and a neighbor") {
  TetMesh m = build_structured_cube_mesh(2);
  for (int f = 0; f < m.n_faces(); ++f) {
    const Face& face = m.faces[f];
    CHECK(face.owner >= 0);
    if (!face.on_boundary()) {
      // Outward normals from the two sides are opposite.
      Vec3 n1 = m.outward_normal(face.owner, f);
      Vec3 n2 = m.outward_normal(face.neighbor, f);
      CHECK((n1 + n2).norm() < 1e-13);
    } else {
      CHECK(face.tag == static_cast<int>(BoundaryTag::Dirichlet));
    }
  }
}

TEST_CASE("partition of unity at random points") {
  TetMesh m = build_structured_cube_mesh(2);
  std::mt19937 rng(42);
  std::uniform_int_distribution<int> pick(0, m.n_tets() - 1);
  for (int trial = 0; trial < 100; ++trial) {
    int t = pick(rng);
    Vec3 x = random_point_in_tet(m, t, rng);
    double sum = 0.0;
    Vec3 grad_sum = Vec3::Zero();
    for (int i = 0; i < 4; ++i) {
      auto [val, grad] = hat_eval(m, m.tets[t][i], t, x);
      sum += val;
      grad_sum += grad;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-13);
    CHECK(grad_sum.norm() <= 1e-12);
  }
}

TEST_CASE("hat function basics") {
  TetMesh m = single_tet();
  auto [v0, g0] = hat_eval(m, 0, 0, Vec3(0, 0, 0));
  CHECK(v0 == doctest::Approx(1.0));
  auto [vb, gb] = hat_eval(m, 0, 0, m.tet_centroid(0));
  CHECK(vb == doctest::Approx(0.25).epsilon(1e-14));
  // Vertex 4 is not a vertex of tet 0: misuse is rejected.
  TetMesh m2 = two_tets();
  CHECK_THROWS_AS(hat_eval(m2, 4, 0, Vec3(0, 0, 0)), std::invalid_argument);
}

TEST_CASE("vertex patches on the N=1 mesh") {
  TetMesh m = build_structured_cube_mesh(1);
  // The cube barycenter is the only interior vertex and touches all tets.
  int bary = -1;
  for (int v = 0; v < m.n_vertices(); ++v)
    if (!m.vertex_on_boundary[v]) bary = v;
  REQUIRE(bary >= 0);
  VertexPatch p = vertex_patch(m, bary);
  CHECK(p.kind == PatchKind::Interior);
  CHECK(p.tets.size() == 24);
  CHECK(p.gamma_d_faces.empty());

  // A cube corner: Dirichlet classification under the default tagging.
  int corner = -1;
  for (int v = 0; v < m.n_vertices(); ++v)
    if ((m.vertices[v] - Vec3(0, 0, 0)).norm() < 1e-14) corner = v;
  REQUIRE(corner >= 0);
  VertexPatch pc = vertex_patch(m, corner);
  CHECK(pc.kind == PatchKind::DirichletBoundary);
  CHECK(pc.tets.size() == 6);
  CHECK(pc.gamma_d_faces.size() == 6);

  // A face center: 4 tets, extended patch covers everything.
  int fc = -1;
  for (int v = 0; v < m.n_vertices(); ++v)
    if ((m.vertices[v] - Vec3(0.5, 0.5, 0.0)).norm() < 1e-14) fc = v;
  REQUIRE(fc >= 0);
  VertexPatch pf = vertex_patch(m, fc);
  CHECK(pf.tets.size() == 4);
  CHECK(pf.extended_tets.size() == 24);
}

TEST_CASE("patch classification with mixed boundary tags") {
  // Tag z=0 Neumann, everything else Dirichlet.
  auto tag = [](const Vec3& c) {
    return c(2) < 1e-12 ? BoundaryTag::Neumann : BoundaryTag::Dirichlet;
  };
  TetMesh m = build_structured_cube_mesh(2, tag);
  // The center of the z=0 face of the cube is interior to the Neumann part.
  int v_neu = -1;
  for (int v = 0; v < m.n_vertices(); ++v)
    if ((m.vertices[v] - Vec3(0.5, 0.5, 0.0)).norm() < 1e-14) v_neu = v;
  REQUIRE(v_neu >= 0);
  CHECK(vertex_patch(m, v_neu).kind == PatchKind::NeumannBoundary);
  // A vertex on the rim z=0, x=0 sees both tags.
  int v_mix = -1;
  for (int v = 0; v < m.n_vertices(); ++v)
    if ((m.vertices[v] - Vec3(0.0, 0.5, 0.0)).norm() < 1e-14) v_mix = v;
  REQUIRE(v_mix >= 0);
  VertexPatch pm = vertex_patch(m, v_mix);
  CHECK(pm.kind == PatchKind::DirichletBoundary);
  CHECK(!pm.gamma_d_faces.empty());
}

TEST_CASE("patch geometry assumption holds on structured meshes") {
  CHECK(validate_patch_geometry(build_structured_cube_mesh(1)).empty());
  CHECK(validate_patch_geometry(build_structured_cube_mesh(2)).empty());
  CHECK(validate_patch_geometry(single_tet()).empty());
  CHECK(validate_patch_geometry(two_tets()).empty());
}

TEST_CASE("mesh file round trip") {
  TetMesh m = build_structured_cube_mesh(1);
  std::string path = "roundtrip_n1.tetmesh";
  save_mesh(m, path);
  TetMesh l = load_mesh(path);
  REQUIRE(l.n_vertices() == m.n_vertices());
  REQUIRE(l.n_tets() == m.n_tets());
  CHECK(l.boundary_face_count() == m.boundary_face_count());
  // Same tets as coordinate sets (entity ordering may differ).
  std::multiset<std::string> sig_m, sig_l;
  auto sig = [](const TetMesh& mm, int t) {
    std::multiset<double> s;
    for (int i = 0; i < 4; ++i)
      for (int c = 0; c < 3; ++c) s.insert(mm.vertices[mm.tets[t][i]](c));
    std::string out;
    for (double v : s) out += std::to_string(v) + ",";
    return out;
  };
  for (int t = 0; t < m.n_tets(); ++t) {
    sig_m.insert(sig(m, t));
    sig_l.insert(sig(l, t));
  }
  CHECK(sig_m == sig_l);
  std::remove(path.c_str());
}

TEST_CASE("loader rejects malformed meshes") {
  auto write = [](const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
  };
  // Degenerate element (repeated vertex index).
  write("bad1.tetmesh",
        "tetmesh 1\nvertices 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\ntets 1\n0 1 2 2\nboundary 0\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_mesh("bad1.tetmesh")),
                       doctest::Contains("degenerate element"), std::runtime_error);

  // Interior face listed as boundary.
  write("bad2.tetmesh",
        "tetmesh 1\n"
        "vertices 5\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0.4 0.4 -1\n"
        "tets 2\n0 1 2 3\n0 1 2 4\n"
        "boundary 7\n"
        "0 1 3 D\n0 2 3 D\n1 2 3 D\n0 1 4 D\n0 2 4 D\n1 2 4 D\n0 1 2 D\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_mesh("bad2.tetmesh")),
                       doctest::Contains("bad boundary"), std::runtime_error);

  // Untagged boundary face.
  write("bad3.tetmesh",
        "tetmesh 1\nvertices 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\ntets 1\n0 1 2 3\n"
        "boundary 3\n0 1 2 D\n0 1 3 D\n0 2 3 D\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_mesh("bad3.tetmesh")),
                       doctest::Contains("untagged"), std::runtime_error);

  // Parse error reports a line number.
  write("bad4.tetmesh", "tetmesh 1\nvertices 1\n0 0\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_mesh("bad4.tetmesh")),
                       doctest::Contains("line 3"), std::runtime_error);

  for (const char* f : {"bad1.tetmesh", "bad2.tetmesh", "bad3.tetmesh", "bad4.tetmesh"})
    std::remove(f);
}

TEST_CASE("patch submesh preserves geometry and orientation order") {
  TetMesh m = build_structured_cube_mesh(1);
  VertexPatch p = vertex_patch(m, 0);
  PatchMesh pm = extract_patch_mesh(m, p.tets);
  CHECK(pm.mesh.n_tets() == static_cast<int>(p.tets.size()));
  for (int t = 0; t < pm.mesh.n_tets(); ++t) {
    CHECK(pm.mesh.volume[t] == doctest::Approx(m.volume[pm.parent_tet[t]]).epsilon(1e-14));
    for (int i = 0; i < 4; ++i) {
      int lv = pm.mesh.tets[t][i];
      CHECK((pm.mesh.vertices[lv] - m.vertices[m.tets[pm.parent_tet[t]][i]]).norm() < 1e-15);
    }
  }
  // Local vertex order preserves the parent order.
  for (size_t i = 1; i < pm.parent_vertex.size(); ++i)
    CHECK(pm.parent_vertex[i - 1] < pm.parent_vertex[i]);
}
