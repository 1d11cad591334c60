// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "curleq/polynomial.hpp"
#include "curleq/quadrature.hpp"

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <memory>
#include <vector>

namespace curleq {

using Vec3 = Eigen::Vector3d;

enum class SpaceKind { Lagrange, Nedelec, RaviartThomas };

inline bool is_vector_kind(SpaceKind k) { return k != SpaceKind::Lagrange; }

/// Dimension of the element space.
int space_dimension(SpaceKind kind, int degree);

/// Degrees of freedom are attached to element entities; `slot` is the
/// element-local entity index and `moment` the index within the entity's
/// moment set.
struct DofKey {
  int dim;    // 0 vertex, 1 edge, 2 face, 3 cell
  int slot;   // vertex 0..3, edge 0..5, face 0..3, cell 0
  int moment;
};

/// Moments per entity of a given dimension (0 for none).
std::array<int, 4> dofs_per_entity(SpaceKind kind, int degree);

/// Shape functions of P_q, ND_q = [P_q]^3 + x cross [P_q]^3, or
/// RT_q = [P_q]^3 + P_q x on a single tetrahedron, dual to entity-moment
/// degrees of freedom defined on globally oriented entities (edges run from
/// the lower to the higher global vertex index, face frames follow the
/// sorted vertex triple). Two elements sharing an entity therefore agree on
/// the shared functionals and no sign flips are needed at assembly.
///
/// The construction follows the space definitions directly: a monomial
/// spanning set is evaluated against the DOF functionals and the resulting
/// matrix is inverted (minimum-norm) to produce the dual basis.
class ElementShapeSet {
public:
  ElementShapeSet(SpaceKind kind, int degree, const Eigen::Matrix<double, 3, 4>& verts,
                  const std::array<int, 4>& global_vertex_ids);

  SpaceKind kind() const { return kind_; }
  int degree() const { return degree_; }
  int ndof() const { return ndof_; }
  const std::vector<DofKey>& dof_keys() const { return keys_; }
  const Eigen::Matrix<double, 3, 4>& vertices() const { return verts_; }

  /// Component values at physical points: one ndof x npts matrix per
  /// component (a single component for Lagrange).
  std::vector<Eigen::MatrixXd> values(const Eigen::Matrix3Xd& points) const;
  /// Differential at physical points: curl components for Nedelec,
  /// the divergence for Raviart-Thomas, gradient components for Lagrange.
  std::vector<Eigen::MatrixXd> differential(const Eigen::Matrix3Xd& points) const;

  /// Canonical interpolation: the DOF functionals applied to an arbitrary
  /// field, integrated with rules of the given exactness. For the dual
  /// basis these are exactly the coefficients of the interpolant.
  Eigen::VectorXd apply_dofs(const std::function<Vec3(const Vec3&)>& field, int exactness) const;
  Eigen::VectorXd apply_dofs_scalar(const std::function<double(const Vec3&)>& field,
                                    int exactness) const;

  /// Max residual of dof_i(shape_j) - delta_ij, recomputed independently.
  double unisolvence_residual() const;

private:
  void build();
  Eigen::MatrixXd monomials_at(const Eigen::Matrix3Xd& points) const;

  SpaceKind kind_;
  int degree_;
  int ndof_;
  int max_poly_degree_;
  Eigen::Matrix<double, 3, 4> verts_;
  std::array<int, 4> gids_;
  Vec3 centroid_;
  double scale_;
  std::vector<DofKey> keys_;
  // Shape coefficients over scaled monomials, per component.
  std::vector<Eigen::MatrixXd> val_;
  std::vector<Eigen::MatrixXd> diff_;
};

} // namespace curleq
