// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "curleq/fe_space.hpp"

#include <functional>

namespace curleq {

/// Element-local coefficient vector over one shape set.
struct ElementField {
  const ElementShapeSet* shapes = nullptr;
  Eigen::VectorXd coeffs;

  Eigen::Vector3d eval(const Vec3& x) const;
  double eval_scalar(const Vec3& x) const;
};

/// L2-orthogonal projection of a scalar field onto P_q(K).
ElementField l2_project_scalar(const ElementShapeSet& p_set,
                               const std::function<double(const Vec3&)>& f, int data_exactness);

/// Componentwise L2 projection of a vector field onto [P_q(K)]^3;
/// returns one ElementField per component.
std::array<ElementField, 3> l2_project_vector(const ElementShapeSet& p_set,
                                              const std::function<Vec3(const Vec3&)>& f,
                                              int data_exactness);

/// Canonical Raviart-Thomas interpolation: face moments against P_q(F) and
/// interior moments against [P_{q-1}(K)]^3 of the interpolate match the
/// field's. Satisfies div I(v) = Pi_q(div v).
ElementField rt_interpolate(const ElementShapeSet& rt_set,
                            const std::function<Vec3(const Vec3&)>& field, int data_exactness);

} // namespace curleq
