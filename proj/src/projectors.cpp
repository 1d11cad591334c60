// SPDX-License-Identifier: Apache-2.0
#include "curleq/projectors.hpp"

#include <stdexcept>

namespace curleq {

Eigen::Vector3d ElementField::eval(const Vec3& x) const {
  Eigen::Matrix3Xd p(3, 1);
  p.col(0) = x;
  auto vals = shapes->values(p);
  return {coeffs.dot(vals[0].col(0)), coeffs.dot(vals[1].col(0)), coeffs.dot(vals[2].col(0))};
}

double ElementField::eval_scalar(const Vec3& x) const {
  Eigen::Matrix3Xd p(3, 1);
  p.col(0) = x;
  return coeffs.dot(shapes->values(p)[0].col(0));
}

namespace {

// Element mass matrix and data moments on the element's volume rule.
Eigen::MatrixXd element_mass(const ElementShapeSet& set, int exactness) {
  QuadratureRule rule = gauss_rule_tet(exactness);
  MappedRule mr = map_to_tet(rule, set.vertices());
  auto vals = set.values(mr.points);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(set.ndof(), set.ndof());
  for (auto& v : vals) M += v * mr.weights.asDiagonal() * v.transpose();
  return M;
}

} // namespace

ElementField l2_project_scalar(const ElementShapeSet& p_set,
                               const std::function<double(const Vec3&)>& f, int data_exactness) {
  if (p_set.kind() != SpaceKind::Lagrange)
    throw std::invalid_argument("l2_project_scalar: expected a Lagrange shape set");
  int q = p_set.degree();
  Eigen::MatrixXd M = element_mass(p_set, 2 * q + 2);
  QuadratureRule rule = gauss_rule_tet(std::max(data_exactness, 2 * q));
  MappedRule mr = map_to_tet(rule, p_set.vertices());
  auto vals = p_set.values(mr.points);
  Eigen::VectorXd F(mr.weights.size());
  for (int i = 0; i < F.size(); ++i) F(i) = f(mr.points.col(i));
  Eigen::VectorXd b = vals[0] * (mr.weights.asDiagonal() * F);
  ElementField out;
  out.shapes = &p_set;
  out.coeffs = Eigen::LDLT<Eigen::MatrixXd>(M).solve(b);
  return out;
}

std::array<ElementField, 3> l2_project_vector(const ElementShapeSet& p_set,
                                              const std::function<Vec3(const Vec3&)>& f,
                                              int data_exactness) {
  std::array<ElementField, 3> out;
  for (int c = 0; c < 3; ++c)
    out[c] = l2_project_scalar(p_set, [&](const Vec3& x) { return f(x)(c); }, data_exactness);
  return out;
}

ElementField rt_interpolate(const ElementShapeSet& rt_set,
                            const std::function<Vec3(const Vec3&)>& field, int data_exactness) {
  if (rt_set.kind() != SpaceKind::RaviartThomas)
    throw std::invalid_argument("rt_interpolate: expected a Raviart-Thomas shape set");
  ElementField out;
  out.shapes = &rt_set;
  // The shape functions are dual to the canonical moments, so the
  // interpolant's coefficients are the moments of the field itself.
  out.coeffs = rt_set.apply_dofs(field, data_exactness);
  return out;
}

} // namespace curleq
