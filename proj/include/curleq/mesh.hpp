// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace curleq {

using Vec3 = Eigen::Vector3d;

enum class BoundaryTag : int { Dirichlet = 0, Neumann = 1 };

/// Mesh face, stored with its vertex triple sorted ascending by global
/// index. Interior faces have two owner tets, boundary faces one and a tag.
struct Face {
  std::array<int, 3> v{};
  int owner = -1;
  int neighbor = -1;
  int tag = -1; // -1 interior, else BoundaryTag
  bool on_boundary() const { return neighbor < 0; }
};

/// Conforming tetrahedral mesh with derived entity tables. Edges are
/// oriented from lower to higher vertex index and faces keyed by their
/// sorted vertex triple, so entity-based degrees of freedom match across
/// elements without permutation tables. Immutable after construction.
struct TetMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<Face> faces;
  std::vector<std::array<int, 2>> edges; // sorted pairs
  std::vector<std::array<int, 4>> tet_faces;
  std::vector<std::array<int, 6>> tet_edges; // slots: (0,1)(0,2)(0,3)(1,2)(1,3)(2,3)
  std::vector<std::vector<int>> vertex_tets;
  std::vector<double> h_tet;
  std::vector<double> volume;
  std::vector<bool> vertex_on_boundary;
  double shape_regularity = 0.0;
  double h_max = 0.0;
  /// Reported mesh size: sqrt(3)/(2N) for the structured cube meshes
  /// (the corner-to-barycenter distance), max tet diameter otherwise.
  double nominal_h = 0.0;

  std::map<std::array<int, 2>, int> edge_index;
  std::map<std::array<int, 3>, int> face_index;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_tets() const { return static_cast<int>(tets.size()); }
  int n_faces() const { return static_cast<int>(faces.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  Eigen::Matrix<double, 3, 4> tet_vertices(int t) const;
  Vec3 tet_centroid(int t) const;
  /// Gradients of the four barycentric coordinates, column i for local vertex i.
  Eigen::Matrix<double, 3, 4> barycentric_gradients(int t) const;
  /// Barycentric coordinates of x in tet t.
  Eigen::Vector4d barycentric(int t, const Vec3& x) const;
  /// Outward unit normal of face f with respect to tet t.
  Vec3 outward_normal(int t, int f) const;
  double face_area(int f) const;
  int boundary_face_count() const;
};

/// Assembles the derived tables (faces, edges, adjacency, quality metrics)
/// for the given vertices and tets; throws on degenerate or non-conforming
/// input. `tag_of` assigns a boundary tag from the face centroid.
TetMesh finalize_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 4>> tets,
                      const std::function<BoundaryTag(const Vec3&)>& tag_of);

/// Structured unit-cube mesh: N^3 cubes, each split into 6 pyramids (base a
/// cube face, apex the cube barycenter), each pyramid into 4 tets through
/// the face center; 24 N^3 tets with mesh size sqrt(3)/(2N). All boundary
/// faces are tagged Dirichlet unless `tag_of` says otherwise.
TetMesh build_structured_cube_mesh(int N,
                                   const std::function<BoundaryTag(const Vec3&)>& tag_of = nullptr);

/// Reads the ASCII "tetmesh 1" format:
///   tetmesh 1
///   vertices <n>   followed by n lines "x y z"
///   tets <m>       followed by m lines of 4 zero-based vertex indices
///   boundary <k>   followed by k lines "v0 v1 v2 tag", tag D or N
/// '#' starts a comment. Errors carry the offending line number.
TetMesh load_mesh(const std::string& path,
                  const std::function<BoundaryTag(const Vec3&, BoundaryTag)>& boundary_spec = nullptr);

void save_mesh(const TetMesh& mesh, const std::string& path);

enum class PatchKind { Interior, NeumannBoundary, DirichletBoundary };

/// The vertex patch T_a: the tets sharing vertex a, the subdomain
/// boundary, the Dirichlet faces at a, and the one-layer extension.
struct VertexPatch {
  int center = -1;
  PatchKind kind = PatchKind::Interior;
  std::vector<int> tets;
  std::vector<int> extended_tets;
  std::vector<int> boundary_faces; // faces of the subdomain boundary
  std::vector<int> gamma_d_faces;  // Dirichlet boundary faces sharing the center
  double h_patch = 0.0;            // diameter of the subdomain
};

VertexPatch vertex_patch(const TetMesh& mesh, int a);

/// Hat-function value and (per-tet constant) gradient of vertex a on tet t.
/// Throws std::invalid_argument when a is not a vertex of t.
std::pair<double, Vec3> hat_eval(const TetMesh& mesh, int a, int t, const Vec3& x);

/// Checks the boundary-patch geometry condition: a boundary vertex passes
/// when its patch has at most two tets, or when every patch-boundary face
/// not sharing the vertex has at least one mesh-interior vertex. Returns
/// the violating boundary vertices (diagnostic only).
std::vector<int> validate_patch_geometry(const TetMesh& mesh);

/// Patch submesh with entity maps back to the parent mesh. Local vertex
/// numbering preserves the parent order, so canonical entity orientations
/// agree with the parent's.
struct PatchMesh {
  TetMesh mesh;
  std::vector<int> parent_tet;
  std::vector<int> parent_vertex;
  std::vector<int> parent_face;
  std::vector<int> parent_edge;
};

PatchMesh extract_patch_mesh(const TetMesh& parent, const std::vector<int>& tets);

} // namespace curleq
