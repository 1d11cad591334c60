// SPDX-License-Identifier: Apache-2.0
#include "curleq/fe_space.hpp"

#include <stdexcept>

namespace curleq {

const ElementShapeSet& ShapeRegistry::get(SpaceKind kind, int degree, int tet) {
  std::lock_guard<std::mutex> lock(mtx_);
  auto key = std::make_pair(static_cast<int>(kind), degree);
  auto& vec = sets_[key];
  if (vec.empty()) vec.resize(mesh_->n_tets());
  if (!vec[tet]) {
    vec[tet] = std::make_shared<ElementShapeSet>(kind, degree, mesh_->tet_vertices(tet),
                                                 mesh_->tets[tet]);
  }
  return *vec[tet];
}

namespace {

int default_cap(SpaceKind kind) {
  return kind == SpaceKind::Lagrange ? kDefaultMaxDegreeP : kDefaultMaxDegreeNDRT;
}

} // namespace

Eigen::VectorXd FeSpace::gather(int t, const Eigen::VectorXd& coeffs) const {
  const auto& dofs = element_dofs[t];
  Eigen::VectorXd local(dofs.size());
  for (size_t k = 0; k < dofs.size(); ++k) local(k) = dofs[k] >= 0 ? coeffs(dofs[k]) : 0.0;
  return local;
}

void FeSpace::scatter_add(int t, const Eigen::VectorXd& local, Eigen::VectorXd& out) const {
  const auto& dofs = element_dofs[t];
  for (size_t k = 0; k < dofs.size(); ++k)
    if (dofs[k] >= 0) out(dofs[k]) += local(k);
}

FeSpace build_space(const TetMesh& mesh, SpaceKind kind, int degree, ShapeRegistry& registry,
                    const std::vector<bool>& face_constrained,
                    const std::vector<int>* parent_tet, int max_degree) {
  int cap = max_degree >= 0 ? max_degree : default_cap(kind);
  if (degree > cap)
    throw std::invalid_argument("build_space: degree above the configured maximum");
  if (kind == SpaceKind::Lagrange && degree < 1)
    throw std::invalid_argument("build_space: Lagrange degree must be >= 1");

  FeSpace sp;
  sp.mesh = &mesh;
  sp.kind = kind;
  sp.degree = degree;

  auto per = dofs_per_entity(kind, degree);

  // Constrained entities: everything lying on a constrained face.
  std::vector<bool> vtx_c(mesh.n_vertices(), false), edge_c(mesh.n_edges(), false);
  std::vector<bool> face_c(mesh.n_faces(), false);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    if (f < static_cast<int>(face_constrained.size()) && face_constrained[f]) {
      if (!mesh.faces[f].on_boundary())
        throw std::invalid_argument("build_space: interior face marked constrained");
      face_c[f] = true;
      for (int v : mesh.faces[f].v) vtx_c[v] = true;
      for (int e = 0; e < 3; ++e) {
        std::array<int, 2> key{mesh.faces[f].v[e], mesh.faces[f].v[(e + 1) % 3]};
        if (key[0] > key[1]) std::swap(key[0], key[1]);
        edge_c[mesh.edge_index.at(key)] = true;
      }
    }
  }

  // Entity base offsets in the deterministic global numbering
  // (vertices, then edges, faces, cells; -1 where constrained).
  auto number = [](const std::vector<bool>& constrained, int count, int per_entity, int& next) {
    std::vector<int> base(count, -1);
    for (int i = 0; i < count; ++i) {
      if (per_entity > 0 && !constrained[i]) {
        base[i] = next;
        next += per_entity;
      }
    }
    return base;
  };
  int next = 0;
  std::vector<bool> no_c_cells(mesh.n_tets(), false);
  std::vector<int> vtx_base = number(vtx_c, mesh.n_vertices(), per[0], next);
  std::vector<int> edge_base = number(edge_c, mesh.n_edges(), per[1], next);
  std::vector<int> face_base = number(face_c, mesh.n_faces(), per[2], next);
  std::vector<int> cell_base = number(no_c_cells, mesh.n_tets(), per[3], next);
  sp.n_free = next;

  sp.shapes.resize(mesh.n_tets());
  sp.element_dofs.resize(mesh.n_tets());
  for (int t = 0; t < mesh.n_tets(); ++t) {
    int parent = parent_tet ? (*parent_tet)[t] : t;
    sp.shapes[t] = &registry.get(kind, degree, parent);
    const auto& keys = sp.shapes[t]->dof_keys();
    auto& dofs = sp.element_dofs[t];
    dofs.resize(keys.size());
    for (size_t k = 0; k < keys.size(); ++k) {
      const DofKey& key = keys[k];
      int base = -1;
      switch (key.dim) {
        case 0: base = vtx_base[mesh.tets[t][key.slot]]; break;
        case 1: base = edge_base[mesh.tet_edges[t][key.slot]]; break;
        case 2: base = face_base[mesh.tet_faces[t][key.slot]]; break;
        case 3: base = cell_base[t]; break;
      }
      dofs[k] = base < 0 ? -1 : base + key.moment;
    }
  }
  return sp;
}

FeSpace build_space_bc(const TetMesh& mesh, SpaceKind kind, int degree, ShapeRegistry& registry,
                       std::optional<BoundaryTag> constrained_tag, int max_degree) {
  std::vector<bool> face_c(mesh.n_faces(), false);
  if (constrained_tag) {
    for (int f = 0; f < mesh.n_faces(); ++f)
      if (mesh.faces[f].on_boundary() &&
          mesh.faces[f].tag == static_cast<int>(*constrained_tag))
        face_c[f] = true;
  }
  return build_space(mesh, kind, degree, registry, face_c, nullptr, max_degree);
}

Eigen::Matrix3Xd CoefficientField::values(int t, const Eigen::Matrix3Xd& pts) const {
  Eigen::VectorXd local = space->gather(t, coeffs);
  auto vals = space->shapes[t]->values(pts);
  Eigen::Matrix3Xd out(3, pts.cols());
  for (int c = 0; c < 3; ++c) out.row(c) = local.transpose() * vals[c];
  return out;
}

Eigen::VectorXd CoefficientField::scalar_values(int t, const Eigen::Matrix3Xd& pts) const {
  Eigen::VectorXd local = space->gather(t, coeffs);
  auto vals = space->shapes[t]->values(pts);
  return (local.transpose() * vals[0]).transpose();
}

Eigen::MatrixXd CoefficientField::differential(int t, const Eigen::Matrix3Xd& pts) const {
  Eigen::VectorXd local = space->gather(t, coeffs);
  auto diffs = space->shapes[t]->differential(pts);
  Eigen::MatrixXd out(diffs.size(), pts.cols());
  for (size_t c = 0; c < diffs.size(); ++c) out.row(c) = local.transpose() * diffs[c];
  return out;
}

PatchSpace build_patch_space(const TetMesh& mesh, const VertexPatch& patch, SpaceKind kind,
                             int degree, ShapeRegistry& registry, int max_degree) {
  PatchSpace ps;
  ps.patch = std::make_shared<PatchMesh>(extract_patch_mesh(mesh, patch.tets));

  // Constrained part of the patch boundary: everything except gamma_D.
  std::vector<bool> gamma_d(mesh.n_faces(), false);
  for (int f : patch.gamma_d_faces) gamma_d[f] = true;
  std::vector<bool> face_c(ps.patch->mesh.n_faces(), false);
  for (int f = 0; f < ps.patch->mesh.n_faces(); ++f) {
    if (!ps.patch->mesh.faces[f].on_boundary()) continue;
    face_c[f] = !gamma_d[ps.patch->parent_face[f]];
  }
  ps.space = build_space(ps.patch->mesh, kind, degree, registry, face_c, &ps.patch->parent_tet,
                         max_degree);
  return ps;
}

void accumulate_patch_field(const PatchSpace& ps, const Eigen::VectorXd& local,
                            const FeSpace& parent_space, Eigen::VectorXd& parent_coeffs,
                            double tol) {
  if (ps.space.kind != parent_space.kind || ps.space.degree != parent_space.degree)
    throw std::invalid_argument("accumulate_patch_field: space mismatch");
  std::vector<bool> done(ps.space.n_free, false);
  double scale = std::max(1.0, local.size() ? local.cwiseAbs().maxCoeff() : 0.0);
  for (int t = 0; t < ps.patch->mesh.n_tets(); ++t) {
    int pt = ps.patch->parent_tet[t];
    const auto& ldofs = ps.space.element_dofs[t];
    const auto& gdofs = parent_space.element_dofs[pt];
    for (size_t k = 0; k < ldofs.size(); ++k) {
      int ld = ldofs[k];
      if (ld < 0 || done[ld]) continue;
      done[ld] = true;
      int gd = gdofs[k];
      if (gd < 0) {
        if (std::abs(local(ld)) > tol * scale)
          throw std::runtime_error(
              "accumulate_patch_field: nonzero patch DOF on a constrained parent DOF");
        continue;
      }
      parent_coeffs(gd) += local(ld);
    }
  }
}

Eigen::SparseMatrix<double> assemble_mass(const FeSpace& space, int exactness) {
  std::vector<Eigen::Triplet<double>> trips;
  QuadratureRule rule = gauss_rule_tet(exactness);
  const TetMesh& mesh = *space.mesh;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    MappedRule mr = map_to_tet(rule, mesh.tet_vertices(t));
    auto vals = space.shapes[t]->values(mr.points);
    int n = space.ndof_element(t);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (auto& v : vals) M += v * mr.weights.asDiagonal() * v.transpose();
    const auto& dofs = space.element_dofs[t];
    for (int i = 0; i < n; ++i) {
      if (dofs[i] < 0) continue;
      for (int j = 0; j < n; ++j)
        if (dofs[j] >= 0) trips.emplace_back(dofs[i], dofs[j], M(i, j));
    }
  }
  Eigen::SparseMatrix<double> out(space.n_free, space.n_free);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Eigen::VectorXd assemble_load(const FeSpace& space,
                              const std::function<Vec3(const Vec3&)>& f, int exactness) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(space.n_free);
  QuadratureRule rule = gauss_rule_tet(exactness);
  const TetMesh& mesh = *space.mesh;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    MappedRule mr = map_to_tet(rule, mesh.tet_vertices(t));
    auto vals = space.shapes[t]->values(mr.points);
    int npts = static_cast<int>(mr.weights.size());
    Eigen::Matrix3Xd F(3, npts);
    for (int q = 0; q < npts; ++q) F.col(q) = f(mr.points.col(q));
    Eigen::VectorXd local = Eigen::VectorXd::Zero(space.ndof_element(t));
    for (int c = 0; c < 3; ++c)
      local += vals[c] * (mr.weights.asDiagonal() * F.row(c).transpose());
    space.scatter_add(t, local, out);
  }
  return out;
}

} // namespace curleq
