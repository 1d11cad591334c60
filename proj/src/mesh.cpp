// SPDX-License-Identifier: Apache-2.0
#include "curleq/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace curleq {

namespace {

constexpr std::array<std::array<int, 2>, 6> kEdgeSlots = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

std::array<int, 3> sorted_triple(int a, int b, int c) {
  std::array<int, 3> t{a, b, c};
  std::sort(t.begin(), t.end());
  return t;
}

double tet_volume_signed(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3) {
  return (p1 - p0).cross(p2 - p0).dot(p3 - p0) / 6.0;
}

} // namespace

Eigen::Matrix<double, 3, 4> TetMesh::tet_vertices(int t) const {
  Eigen::Matrix<double, 3, 4> v;
  for (int i = 0; i < 4; ++i) v.col(i) = vertices[tets[t][i]];
  return v;
}

Vec3 TetMesh::tet_centroid(int t) const {
  Vec3 c = Vec3::Zero();
  for (int i = 0; i < 4; ++i) c += vertices[tets[t][i]];
  return c / 4.0;
}

Eigen::Matrix<double, 3, 4> TetMesh::barycentric_gradients(int t) const {
  const auto& tv = tets[t];
  Eigen::Matrix3d J;
  J.col(0) = vertices[tv[1]] - vertices[tv[0]];
  J.col(1) = vertices[tv[2]] - vertices[tv[0]];
  J.col(2) = vertices[tv[3]] - vertices[tv[0]];
  Eigen::Matrix3d Jit = J.inverse().transpose();
  Eigen::Matrix<double, 3, 4> g;
  g.col(1) = Jit.col(0);
  g.col(2) = Jit.col(1);
  g.col(3) = Jit.col(2);
  g.col(0) = -g.col(1) - g.col(2) - g.col(3);
  return g;
}

Eigen::Vector4d TetMesh::barycentric(int t, const Vec3& x) const {
  auto g = barycentric_gradients(t);
  Eigen::Vector4d lam;
  for (int i = 0; i < 4; ++i)
    lam(i) = 1.0 + g.col(i).dot(x - vertices[tets[t][i]]);
  return lam;
}

Vec3 TetMesh::outward_normal(int t, int f) const {
  const Face& face = faces[f];
  Vec3 p0 = vertices[face.v[0]], p1 = vertices[face.v[1]], p2 = vertices[face.v[2]];
  Vec3 n = (p1 - p0).cross(p2 - p0).normalized();
  // Orient away from the opposite vertex of tet t.
  int opp = -1;
  for (int i = 0; i < 4; ++i) {
    int v = tets[t][i];
    if (v != face.v[0] && v != face.v[1] && v != face.v[2]) opp = v;
  }
  if (n.dot(vertices[opp] - p0) > 0) n = -n;
  return n;
}

double TetMesh::face_area(int f) const {
  const Face& face = faces[f];
  Vec3 p0 = vertices[face.v[0]], p1 = vertices[face.v[1]], p2 = vertices[face.v[2]];
  return 0.5 * (p1 - p0).cross(p2 - p0).norm();
}

int TetMesh::boundary_face_count() const {
  int n = 0;
  for (const auto& f : faces)
    if (f.on_boundary()) ++n;
  return n;
}

TetMesh finalize_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 4>> tets,
                      const std::function<BoundaryTag(const Vec3&)>& tag_of) {
  TetMesh m;
  m.vertices = std::move(vertices);
  m.tets = std::move(tets);
  const int nv = m.n_vertices();
  const int nt = m.n_tets();

  m.h_tet.resize(nt);
  m.volume.resize(nt);
  for (int t = 0; t < nt; ++t) {
    auto& tv = m.tets[t];
    for (int i = 0; i < 4; ++i) {
      if (tv[i] < 0 || tv[i] >= nv) throw std::runtime_error("tet vertex index out of range");
      for (int j = i + 1; j < 4; ++j)
        if (tv[i] == tv[j]) throw std::runtime_error("degenerate element: repeated vertex index");
    }
    double vol = tet_volume_signed(m.vertices[tv[0]], m.vertices[tv[1]], m.vertices[tv[2]],
                                   m.vertices[tv[3]]);
    if (vol < 0) {
      std::swap(tv[0], tv[1]);
      vol = -vol;
    }
    double h = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        h = std::max(h, (m.vertices[tv[i]] - m.vertices[tv[j]]).norm());
    if (vol < 1e-14 * h * h * h)
      throw std::runtime_error("degenerate element: vanishing volume");
    m.h_tet[t] = h;
    m.volume[t] = vol;
    m.h_max = std::max(m.h_max, h);
  }

  // Edge table.
  m.tet_edges.resize(nt);
  for (int t = 0; t < nt; ++t) {
    for (int s = 0; s < 6; ++s) {
      int a = m.tets[t][kEdgeSlots[s][0]], b = m.tets[t][kEdgeSlots[s][1]];
      std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      auto it = m.edge_index.find(key);
      int id;
      if (it == m.edge_index.end()) {
        id = static_cast<int>(m.edges.size());
        m.edges.push_back(key);
        m.edge_index.emplace(key, id);
      } else {
        id = it->second;
      }
      m.tet_edges[t][s] = id;
    }
  }

  // Face table; local face i is opposite local vertex i.
  m.tet_faces.resize(nt);
  for (int t = 0; t < nt; ++t) {
    for (int i = 0; i < 4; ++i) {
      const auto& tv = m.tets[t];
      std::array<int, 3> key = sorted_triple(tv[(i + 1) % 4], tv[(i + 2) % 4], tv[(i + 3) % 4]);
      auto it = m.face_index.find(key);
      if (it == m.face_index.end()) {
        Face f;
        f.v = key;
        f.owner = t;
        int id = static_cast<int>(m.faces.size());
        m.faces.push_back(f);
        m.face_index.emplace(key, id);
        m.tet_faces[t][i] = id;
      } else {
        Face& f = m.faces[it->second];
        if (f.neighbor >= 0)
          throw std::runtime_error("non-conforming connectivity: face shared by >2 tets");
        f.neighbor = t;
        m.tet_faces[t][i] = it->second;
      }
    }
  }

  // Boundary tagging and closure check: each boundary edge must belong to
  // exactly two boundary faces.
  std::map<std::array<int, 2>, int> bnd_edge_count;
  for (auto& f : m.faces) {
    if (!f.on_boundary()) continue;
    Vec3 c = (m.vertices[f.v[0]] + m.vertices[f.v[1]] + m.vertices[f.v[2]]) / 3.0;
    f.tag = static_cast<int>(tag_of ? tag_of(c) : BoundaryTag::Dirichlet);
    for (int e = 0; e < 3; ++e) {
      std::array<int, 2> key{std::min(f.v[e], f.v[(e + 1) % 3]),
                             std::max(f.v[e], f.v[(e + 1) % 3])};
      bnd_edge_count[key]++;
    }
  }
  for (const auto& [key, cnt] : bnd_edge_count)
    if (cnt != 2) throw std::runtime_error("non-manifold/bad boundary: open boundary edge");

  m.vertex_tets.resize(nv);
  for (int t = 0; t < nt; ++t)
    for (int i = 0; i < 4; ++i) m.vertex_tets[m.tets[t][i]].push_back(t);
  for (auto& lst : m.vertex_tets) std::sort(lst.begin(), lst.end());

  m.vertex_on_boundary.assign(nv, false);
  for (const auto& f : m.faces)
    if (f.on_boundary())
      for (int v : f.v) m.vertex_on_boundary[v] = true;

  double kappa = 0.0;
  for (int t = 0; t < nt; ++t) {
    double area_sum = 0.0;
    for (int i = 0; i < 4; ++i) area_sum += m.face_area(m.tet_faces[t][i]);
    double rho = 2.0 * 3.0 * m.volume[t] / area_sum; // insphere diameter
    kappa = std::max(kappa, m.h_tet[t] / rho);
  }
  m.shape_regularity = kappa;
  m.nominal_h = m.h_max;
  return m;
}

TetMesh build_structured_cube_mesh(int N, const std::function<BoundaryTag(const Vec3&)>& tag_of) {
  if (N < 1) throw std::invalid_argument("build_structured_cube_mesh: N must be >= 1");
  const double s = 1.0 / N;
  std::vector<Vec3> verts;
  auto grid = [&](int i, int j, int k) { return (i * (N + 1) + j) * (N + 1) + k; };
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j)
      for (int k = 0; k <= N; ++k) verts.emplace_back(i * s, j * s, k * s);

  // Face centers of the cubical cells, one block per orientation.
  int base_x = static_cast<int>(verts.size());
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k) verts.emplace_back(i * s, (j + 0.5) * s, (k + 0.5) * s);
  int base_y = static_cast<int>(verts.size());
  for (int i = 0; i < N; ++i)
    for (int j = 0; j <= N; ++j)
      for (int k = 0; k < N; ++k) verts.emplace_back((i + 0.5) * s, j * s, (k + 0.5) * s);
  int base_z = static_cast<int>(verts.size());
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k <= N; ++k) verts.emplace_back((i + 0.5) * s, (j + 0.5) * s, k * s);
  int base_c = static_cast<int>(verts.size());
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k) verts.emplace_back((i + 0.5) * s, (j + 0.5) * s, (k + 0.5) * s);

  auto fx = [&](int i, int j, int k) { return base_x + (i * N + j) * N + k; };
  auto fy = [&](int i, int j, int k) { return base_y + (i * (N + 1) + j) * N + k; };
  auto fz = [&](int i, int j, int k) { return base_z + (i * N + j) * (N + 1) + k; };
  auto cc = [&](int i, int j, int k) { return base_c + (i * N + j) * N + k; };

  std::vector<std::array<int, 4>> tets;
  tets.reserve(24 * N * N * N);
  auto add_pyramid = [&](const std::array<int, 4>& ring, int fcenter, int center) {
    for (int r = 0; r < 4; ++r) {
      std::array<int, 4> t{ring[r], ring[(r + 1) % 4], fcenter, center};
      double vol = tet_volume_signed(verts[t[0]], verts[t[1]], verts[t[2]], verts[t[3]]);
      if (vol < 0) std::swap(t[0], t[1]);
      tets.push_back(t);
    }
  };

  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k) {
        int c = cc(i, j, k);
        add_pyramid({grid(i, j, k), grid(i, j + 1, k), grid(i, j + 1, k + 1), grid(i, j, k + 1)},
                    fx(i, j, k), c);
        add_pyramid({grid(i + 1, j, k), grid(i + 1, j + 1, k), grid(i + 1, j + 1, k + 1),
                     grid(i + 1, j, k + 1)},
                    fx(i + 1, j, k), c);
        add_pyramid({grid(i, j, k), grid(i + 1, j, k), grid(i + 1, j, k + 1), grid(i, j, k + 1)},
                    fy(i, j, k), c);
        add_pyramid({grid(i, j + 1, k), grid(i + 1, j + 1, k), grid(i + 1, j + 1, k + 1),
                     grid(i, j + 1, k + 1)},
                    fy(i, j + 1, k), c);
        add_pyramid({grid(i, j, k), grid(i + 1, j, k), grid(i + 1, j + 1, k), grid(i, j + 1, k)},
                    fz(i, j, k), c);
        add_pyramid({grid(i, j, k + 1), grid(i + 1, j, k + 1), grid(i + 1, j + 1, k + 1),
                     grid(i, j + 1, k + 1)},
                    fz(i, j, k + 1), c);
      }

  TetMesh m = finalize_mesh(std::move(verts), std::move(tets), tag_of);
  m.nominal_h = std::sqrt(3.0) / (2.0 * N);
  return m;
}

namespace {

// Line-based tokenizer for the mesh format; strips '#' comments.
struct MeshReader {
  std::ifstream in;
  int line_no = 0;
  explicit MeshReader(const std::string& path) : in(path) {}

  std::vector<std::string> next_tokens() {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      std::istringstream is(line);
      std::vector<std::string> toks;
      std::string t;
      while (is >> t) toks.push_back(t);
      if (!toks.empty()) return toks;
    }
    return {};
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("mesh parse error at line " + std::to_string(line_no) + ": " + what);
  }
};

} // namespace

TetMesh load_mesh(const std::string& path,
                  const std::function<BoundaryTag(const Vec3&, BoundaryTag)>& boundary_spec) {
  MeshReader r(path);
  if (!r.in) throw std::runtime_error("cannot open mesh file: " + path);

  auto toks = r.next_tokens();
  if (toks.size() != 2 || toks[0] != "tetmesh" || toks[1] != "1")
    r.fail("expected header 'tetmesh 1'");

  toks = r.next_tokens();
  if (toks.size() != 2 || toks[0] != "vertices") r.fail("expected 'vertices <n>'");
  int nv = std::stoi(toks[1]);
  std::vector<Vec3> verts(nv);
  for (int i = 0; i < nv; ++i) {
    toks = r.next_tokens();
    if (toks.size() != 3) r.fail("expected 3 coordinates");
    verts[i] = Vec3(std::stod(toks[0]), std::stod(toks[1]), std::stod(toks[2]));
  }

  toks = r.next_tokens();
  if (toks.size() != 2 || toks[0] != "tets") r.fail("expected 'tets <m>'");
  int nt = std::stoi(toks[1]);
  std::vector<std::array<int, 4>> tets(nt);
  for (int i = 0; i < nt; ++i) {
    toks = r.next_tokens();
    if (toks.size() != 4) r.fail("expected 4 vertex indices");
    for (int j = 0; j < 4; ++j) tets[i][j] = std::stoi(toks[j]);
  }

  toks = r.next_tokens();
  if (toks.size() != 2 || toks[0] != "boundary") r.fail("expected 'boundary <k>'");
  int nb = std::stoi(toks[1]);
  std::map<std::array<int, 3>, BoundaryTag> listed;
  for (int i = 0; i < nb; ++i) {
    toks = r.next_tokens();
    if (toks.size() != 4) r.fail("expected 'v0 v1 v2 tag'");
    std::array<int, 3> key =
        sorted_triple(std::stoi(toks[0]), std::stoi(toks[1]), std::stoi(toks[2]));
    if (toks[3] == "D")
      listed[key] = BoundaryTag::Dirichlet;
    else if (toks[3] == "N")
      listed[key] = BoundaryTag::Neumann;
    else
      r.fail("boundary tag must be D or N");
  }

  TetMesh m = finalize_mesh(std::move(verts), std::move(tets), nullptr);

  // Cross-check the listed boundary against the derived one.
  int n_derived = 0;
  for (auto& f : m.faces) {
    if (f.on_boundary()) {
      ++n_derived;
      auto it = listed.find(f.v);
      if (it == listed.end())
        throw std::runtime_error("untagged boundary face in mesh file");
      BoundaryTag tag = it->second;
      if (boundary_spec) {
        Vec3 c = (m.vertices[f.v[0]] + m.vertices[f.v[1]] + m.vertices[f.v[2]]) / 3.0;
        tag = boundary_spec(c, tag);
      }
      f.tag = static_cast<int>(tag);
    } else if (listed.count(f.v)) {
      throw std::runtime_error("non-manifold/bad boundary: interior face listed as boundary");
    }
  }
  if (n_derived != static_cast<int>(listed.size()))
    throw std::runtime_error("non-manifold/bad boundary: listed face does not exist");
  return m;
}

void save_mesh(const TetMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.precision(17);
  out << "tetmesh 1\n";
  out << "vertices " << mesh.n_vertices() << "\n";
  for (const auto& v : mesh.vertices) out << v(0) << " " << v(1) << " " << v(2) << "\n";
  out << "tets " << mesh.n_tets() << "\n";
  for (const auto& t : mesh.tets) out << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << "\n";
  out << "boundary " << mesh.boundary_face_count() << "\n";
  for (const auto& f : mesh.faces)
    if (f.on_boundary())
      out << f.v[0] << " " << f.v[1] << " " << f.v[2] << " "
          << (f.tag == static_cast<int>(BoundaryTag::Neumann) ? "N" : "D") << "\n";
}

VertexPatch vertex_patch(const TetMesh& mesh, int a) {
  if (a < 0 || a >= mesh.n_vertices()) throw std::invalid_argument("vertex_patch: bad vertex");
  VertexPatch p;
  p.center = a;
  p.tets = mesh.vertex_tets[a];

  std::set<int> in_patch(p.tets.begin(), p.tets.end());
  std::set<int> patch_vertices;
  for (int t : p.tets)
    for (int v : mesh.tets[t]) patch_vertices.insert(v);

  for (int t : p.tets) {
    for (int i = 0; i < 4; ++i) {
      int f = mesh.tet_faces[t][i];
      const Face& face = mesh.faces[f];
      int other = (face.owner == t) ? face.neighbor : face.owner;
      if (other < 0 || !in_patch.count(other)) p.boundary_faces.push_back(f);
    }
  }
  std::sort(p.boundary_faces.begin(), p.boundary_faces.end());
  p.boundary_faces.erase(std::unique(p.boundary_faces.begin(), p.boundary_faces.end()),
                         p.boundary_faces.end());

  if (!mesh.vertex_on_boundary[a]) {
    p.kind = PatchKind::Interior;
  } else {
    bool all_neumann = true;
    for (int f : p.boundary_faces) {
      const Face& face = mesh.faces[f];
      if (!face.on_boundary()) continue;
      bool shares = face.v[0] == a || face.v[1] == a || face.v[2] == a;
      if (!shares) continue;
      if (face.tag == static_cast<int>(BoundaryTag::Dirichlet)) {
        all_neumann = false;
        p.gamma_d_faces.push_back(f);
      }
    }
    p.kind = all_neumann ? PatchKind::NeumannBoundary : PatchKind::DirichletBoundary;
  }

  for (int v1 : patch_vertices)
    for (int v2 : patch_vertices)
      p.h_patch = std::max(p.h_patch, (mesh.vertices[v1] - mesh.vertices[v2]).norm());

  std::set<int> ext;
  for (int v : patch_vertices)
    for (int t : mesh.vertex_tets[v]) ext.insert(t);
  p.extended_tets.assign(ext.begin(), ext.end());
  return p;
}

std::pair<double, Vec3> hat_eval(const TetMesh& mesh, int a, int t, const Vec3& x) {
  const auto& tv = mesh.tets[t];
  int local = -1;
  for (int i = 0; i < 4; ++i)
    if (tv[i] == a) local = i;
  if (local < 0)
    throw std::invalid_argument("hat_eval: tet is not in the patch of the vertex");
  auto g = mesh.barycentric_gradients(t);
  double val = 1.0 + g.col(local).dot(x - mesh.vertices[a]);
  return {val, g.col(local)};
}

std::vector<int> validate_patch_geometry(const TetMesh& mesh) {
  std::vector<int> violators;
  for (int a = 0; a < mesh.n_vertices(); ++a) {
    if (!mesh.vertex_on_boundary[a]) continue;
    VertexPatch p = vertex_patch(mesh, a);
    if (static_cast<int>(p.tets.size()) <= 2) continue;
    bool ok = true;
    for (int f : p.boundary_faces) {
      const Face& face = mesh.faces[f];
      if (face.v[0] == a || face.v[1] == a || face.v[2] == a) continue;
      bool has_interior_vertex = false;
      for (int v : face.v)
        if (!mesh.vertex_on_boundary[v]) has_interior_vertex = true;
      if (!has_interior_vertex) {
        ok = false;
        break;
      }
    }
    if (!ok) violators.push_back(a);
  }
  return violators;
}

PatchMesh extract_patch_mesh(const TetMesh& parent, const std::vector<int>& tets) {
  PatchMesh pm;
  pm.parent_tet = tets;

  std::set<int> vset;
  for (int t : tets)
    for (int v : parent.tets[t]) vset.insert(v);
  pm.parent_vertex.assign(vset.begin(), vset.end()); // ascending: order-preserving
  std::map<int, int> to_local;
  for (int i = 0; i < static_cast<int>(pm.parent_vertex.size()); ++i)
    to_local[pm.parent_vertex[i]] = i;

  std::vector<Vec3> verts;
  verts.reserve(pm.parent_vertex.size());
  for (int v : pm.parent_vertex) verts.push_back(parent.vertices[v]);

  std::vector<std::array<int, 4>> ltets;
  ltets.reserve(tets.size());
  for (int t : tets) {
    std::array<int, 4> lt;
    for (int i = 0; i < 4; ++i) lt[i] = to_local[parent.tets[t][i]];
    ltets.push_back(lt);
  }

  pm.mesh = finalize_mesh(std::move(verts), std::move(ltets), nullptr);

  pm.parent_face.resize(pm.mesh.n_faces());
  for (int f = 0; f < pm.mesh.n_faces(); ++f) {
    std::array<int, 3> key;
    for (int i = 0; i < 3; ++i) key[i] = pm.parent_vertex[pm.mesh.faces[f].v[i]];
    std::sort(key.begin(), key.end());
    pm.parent_face[f] = parent.face_index.at(key);
  }
  pm.parent_edge.resize(pm.mesh.n_edges());
  for (int e = 0; e < pm.mesh.n_edges(); ++e) {
    std::array<int, 2> key{pm.parent_vertex[pm.mesh.edges[e][0]],
                           pm.parent_vertex[pm.mesh.edges[e][1]]};
    if (key[0] > key[1]) std::swap(key[0], key[1]);
    pm.parent_edge[e] = parent.edge_index.at(key);
  }
  return pm;
}

} // namespace curleq
