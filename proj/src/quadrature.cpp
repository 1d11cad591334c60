// SPDX-License-Identifier: Apache-2.0
#include "curleq/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace curleq {

namespace {

constexpr int kMaxExactness = 30;

// Gauss nodes/weights on [0,1] for the Jacobi weight (1-x)^alpha, alpha in
// {0,1,2}, computed by the Golub-Welsch algorithm from the three-term
// recurrence of the (shifted) Jacobi polynomials.
void gauss_jacobi_01(int n, int alpha, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  // Recurrence coefficients for Jacobi P^{(alpha,0)} on [-1,1]:
  //   a_k = (b^2-a^2) / ((2k+a+b)(2k+a+b+2)), with a=alpha, b=0
  //   sqrt(b_k) off-diagonal terms per Golub-Welsch.
  const double a = alpha, b = 0.0;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    double denom = (2.0 * k + a + b) * (2.0 * k + a + b + 2.0);
    double ak = (denom == 0.0) ? (b - a) / (a + b + 2.0)
                               : (b * b - a * a) / denom;
    J(k, k) = ak;
    if (k + 1 < n) {
      double kk = k + 1;
      double num = 4.0 * kk * (kk + a) * (kk + b) * (kk + a + b);
      double den = std::pow(2.0 * kk + a + b, 2) * (2.0 * kk + a + b + 1.0) *
                   (2.0 * kk + a + b - 1.0);
      J(k, k + 1) = J(k + 1, k) = std::sqrt(num / den);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const double mu0 = std::pow(2.0, a + b + 1.0) / (a + b + 1.0); // int_{-1}^{1} (1-t)^a
  x.resize(n);
  w.resize(n);
  for (int k = 0; k < n; ++k) {
    double t = es.eigenvalues()(k);          // node in [-1,1]
    x(k) = 0.5 * (t + 1.0);                  // map to [0,1]
    double v = es.eigenvectors()(0, k);
    // weight on [-1,1], then account for the map: (1-x)^a dx = ((1-t)/2)^a dt/2
    w(k) = mu0 * v * v / std::pow(2.0, a + 1.0);
  }
}

int points_per_direction(int exactness) { return std::max(1, (exactness + 2) / 2); }

} // namespace

int max_quadrature_exactness() { return kMaxExactness; }

QuadratureRule gauss_rule_segment(int exactness) {
  if (exactness < 0 || exactness > kMaxExactness)
    throw std::invalid_argument("gauss_rule_segment: unsupported exactness");
  int n = points_per_direction(exactness);
  Eigen::VectorXd x, w;
  gauss_jacobi_01(n, 0, x, w);
  QuadratureRule r;
  r.dim = 1;
  r.exactness = 2 * n - 1;
  r.points = x;
  r.weights = w;
  return r;
}

QuadratureRule gauss_rule_triangle(int exactness) {
  if (exactness < 0 || exactness > kMaxExactness)
    throw std::invalid_argument("gauss_rule_triangle: unsupported exactness");
  int n = points_per_direction(exactness);
  Eigen::VectorXd x1, w1, x0, w0;
  gauss_jacobi_01(n, 1, x1, w1);
  gauss_jacobi_01(n, 0, x0, w0);
  QuadratureRule r;
  r.dim = 2;
  r.exactness = 2 * n - 1;
  r.points.resize(n * n, 2);
  r.weights.resize(n * n);
  int idx = 0;
  // x = xi, y = eta (1-xi); Jacobian (1-xi) absorbed by the Jacobi weight.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j, ++idx) {
      r.points(idx, 0) = x1(i);
      r.points(idx, 1) = x0(j) * (1.0 - x1(i));
      r.weights(idx) = w1(i) * w0(j);
    }
  return r;
}

QuadratureRule gauss_rule_tet(int exactness) {
  if (exactness < 0 || exactness > kMaxExactness)
    throw std::invalid_argument("gauss_rule_tet: unsupported exactness");
  int n = points_per_direction(exactness);
  Eigen::VectorXd x2, w2, x1, w1, x0, w0;
  gauss_jacobi_01(n, 2, x2, w2);
  gauss_jacobi_01(n, 1, x1, w1);
  gauss_jacobi_01(n, 0, x0, w0);
  QuadratureRule r;
  r.dim = 3;
  r.exactness = 2 * n - 1;
  r.points.resize(n * n * n, 3);
  r.weights.resize(n * n * n);
  int idx = 0;
  // x = xi, y = eta (1-xi), z = zeta (1-xi)(1-eta).
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k, ++idx) {
        r.points(idx, 0) = x2(i);
        r.points(idx, 1) = x1(j) * (1.0 - x2(i));
        r.points(idx, 2) = x0(k) * (1.0 - x2(i)) * (1.0 - x1(j));
        r.weights(idx) = w2(i) * w1(j) * w0(k);
      }
  return r;
}

MappedRule map_to_tet(const QuadratureRule& ref, const Eigen::Matrix<double, 3, 4>& v) {
  Eigen::Matrix3d J;
  J.col(0) = v.col(1) - v.col(0);
  J.col(1) = v.col(2) - v.col(0);
  J.col(2) = v.col(3) - v.col(0);
  double jac = std::abs(J.determinant());
  MappedRule m;
  int n = ref.size();
  m.points.resize(3, n);
  m.weights.resize(n);
  for (int q = 0; q < n; ++q) {
    Eigen::Vector3d xi = ref.points.row(q).transpose();
    m.points.col(q) = v.col(0) + J * xi;
    m.weights(q) = ref.weights(q) * jac;
  }
  return m;
}

MappedRule map_to_triangle(const QuadratureRule& ref, const Eigen::Matrix3d& v) {
  Eigen::Vector3d e1 = v.col(1) - v.col(0), e2 = v.col(2) - v.col(0);
  double area2 = e1.cross(e2).norm(); // 2*area
  MappedRule m;
  int n = ref.size();
  m.points.resize(3, n);
  m.weights.resize(n);
  for (int q = 0; q < n; ++q) {
    double u = ref.points(q, 0), w = ref.points(q, 1);
    m.points.col(q) = v.col(0) + u * e1 + w * e2;
    m.weights(q) = ref.weights(q) * area2;
  }
  return m;
}

MappedRule map_to_segment(const QuadratureRule& ref, const Eigen::Vector3d& a,
                          const Eigen::Vector3d& b) {
  double len = (b - a).norm();
  MappedRule m;
  int n = ref.size();
  m.points.resize(3, n);
  m.weights.resize(n);
  for (int q = 0; q < n; ++q) {
    m.points.col(q) = a + ref.points(q, 0) * (b - a);
    m.weights(q) = ref.weights(q) * len;
  }
  return m;
}

} // namespace curleq
