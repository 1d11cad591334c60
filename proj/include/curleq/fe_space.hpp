// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "curleq/mesh.hpp"
#include "curleq/shape_set.hpp"

#include <Eigen/Sparse>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

namespace curleq {

/// Lazily built element shape sets for one mesh, shared between the global
/// spaces and the patch-local spaces (a patch element reuses the parent
/// element's set, so DOF orderings coincide). Thread-safe.
class ShapeRegistry {
public:
  explicit ShapeRegistry(const TetMesh& mesh) : mesh_(&mesh) {}

  const ElementShapeSet& get(SpaceKind kind, int degree, int tet);
  const TetMesh& mesh() const { return *mesh_; }

private:
  const TetMesh* mesh_;
  std::mutex mtx_;
  std::map<std::pair<int, int>, std::vector<std::shared_ptr<const ElementShapeSet>>> sets_;
};

/// Default cap on the space degree (the experiment drivers raise it to
/// p+1 for the reconstruction spaces).
inline constexpr int kDefaultMaxDegreeNDRT = 4;
inline constexpr int kDefaultMaxDegreeP = 5;

/// A conforming finite element space over a TetMesh (the full mesh or a
/// patch submesh). Degrees of freedom live on entities; DOFs on
/// constrained boundary faces (and their edges/vertices) are masked out,
/// which imposes the homogeneous trace condition of the space kind.
/// Immutable after construction.
struct FeSpace {
  const TetMesh* mesh = nullptr;
  SpaceKind kind = SpaceKind::Lagrange;
  int degree = 0;
  std::vector<const ElementShapeSet*> shapes;   // per element
  std::vector<std::vector<int>> element_dofs;   // -1 where constrained
  int n_free = 0;

  int ndof_element(int t) const { return shapes[t]->ndof(); }

  /// Coefficients of element t (constrained entries produce zeros).
  Eigen::VectorXd gather(int t, const Eigen::VectorXd& coeffs) const;
  /// Adds local element values into a global vector, skipping masked DOFs.
  void scatter_add(int t, const Eigen::VectorXd& local, Eigen::VectorXd& out) const;
};

/// Builds a space on `mesh` with DOFs masked on the faces where
/// `face_constrained[f]` is true (only boundary faces may be constrained).
/// Throws when `degree` exceeds `max_degree`.
FeSpace build_space(const TetMesh& mesh, SpaceKind kind, int degree, ShapeRegistry& registry,
                    const std::vector<bool>& face_constrained,
                    const std::vector<int>* parent_tet = nullptr, int max_degree = -1);

/// Convenience: constrain the boundary faces carrying the given tag
/// (pass std::nullopt for an unconstrained space).
FeSpace build_space_bc(const TetMesh& mesh, SpaceKind kind, int degree, ShapeRegistry& registry,
                       std::optional<BoundaryTag> constrained_tag, int max_degree = -1);

/// Coefficient vector over a space.
struct CoefficientField {
  const FeSpace* space = nullptr;
  Eigen::VectorXd coeffs;

  CoefficientField() = default;
  explicit CoefficientField(const FeSpace& s)
      : space(&s), coeffs(Eigen::VectorXd::Zero(s.n_free)) {}

  /// Field values on element t at the given physical points (3 x npts).
  Eigen::Matrix3Xd values(int t, const Eigen::Matrix3Xd& pts) const;
  /// Scalar values (Lagrange spaces).
  Eigen::VectorXd scalar_values(int t, const Eigen::Matrix3Xd& pts) const;
  /// curl (Nedelec) as 3 x npts, div (Raviart-Thomas) as 1 x npts,
  /// grad (Lagrange) as 3 x npts.
  Eigen::MatrixXd differential(int t, const Eigen::Matrix3Xd& pts) const;
};

/// The patch-local trial spaces of the reconstruction: an FeSpace over the
/// patch submesh together with the transfer data back to the parent mesh.
/// The submesh lives behind a shared_ptr so the space's mesh pointer stays
/// valid when a PatchSpace is moved around.
struct PatchSpace {
  std::shared_ptr<PatchMesh> patch;
  FeSpace space;
};

/// Patch space with the boundary conditions of the patch: the trace is
/// constrained on the whole patch boundary, except on gamma_D for patches
/// of Dirichlet boundary vertices where it stays free.
PatchSpace build_patch_space(const TetMesh& mesh, const VertexPatch& patch, SpaceKind kind,
                             int degree, ShapeRegistry& registry, int max_degree = -1);

/// Accumulates a patch-local field into a parent-mesh field; both spaces
/// must have the same kind and degree. Entries masked in the parent space
/// are checked to be zero in the patch field (within `tol`).
void accumulate_patch_field(const PatchSpace& ps, const Eigen::VectorXd& local,
                            const FeSpace& parent_space, Eigen::VectorXd& parent_coeffs,
                            double tol = 1e-9);

/// Sparse mass matrix (free DOFs), integrated at the given exactness.
Eigen::SparseMatrix<double> assemble_mass(const FeSpace& space, int exactness);

/// Load vector (f, phi_i) for a vector-valued f.
Eigen::VectorXd assemble_load(const FeSpace& space,
                              const std::function<Vec3(const Vec3&)>& f, int exactness);

} // namespace curleq
