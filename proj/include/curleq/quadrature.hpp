// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace curleq {

/// Quadrature rule on a reference simplex (segment [0,1], unit triangle,
/// or unit tetrahedron). Points are stored in reference coordinates, the
/// weights sum to the reference measure (1, 1/2, 1/6).
struct QuadratureRule {
  int dim = 3;
  int exactness = 0;
  Eigen::MatrixXd points;  // npts x dim
  Eigen::VectorXd weights; // npts

  int size() const { return static_cast<int>(weights.size()); }
};

/// Conical-product Gauss rule on the unit tetrahedron, exact for all
/// polynomials of total degree <= exactness. Throws std::invalid_argument
/// above the supported maximum.
QuadratureRule gauss_rule_tet(int exactness);

/// Same construction on the unit triangle {x,y >= 0, x+y <= 1}.
QuadratureRule gauss_rule_triangle(int exactness);

/// Gauss-Legendre rule on [0,1].
QuadratureRule gauss_rule_segment(int exactness);

/// Largest supported exactness degree.
int max_quadrature_exactness();

/// Physical quadrature points/weights for a tetrahedron with vertex
/// columns `v` (3x4): x = v0 + J*xi, weights scaled by |det J|.
struct MappedRule {
  Eigen::Matrix3Xd points; // 3 x npts
  Eigen::VectorXd weights;
};
MappedRule map_to_tet(const QuadratureRule& ref, const Eigen::Matrix<double, 3, 4>& v);

/// Physical rule on a triangle in 3D with vertex columns `v` (3x3).
MappedRule map_to_triangle(const QuadratureRule& ref, const Eigen::Matrix3d& v);

/// Physical rule on a segment from a to b.
MappedRule map_to_segment(const QuadratureRule& ref, const Eigen::Vector3d& a,
                          const Eigen::Vector3d& b);

} // namespace curleq
