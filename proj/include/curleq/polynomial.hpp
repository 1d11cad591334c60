// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace curleq {

/// Dense trivariate polynomial in monomial form. Coefficients are stored
/// over all monomials x^i y^j z^k with i+j+k <= degree, ordered by total
/// degree and lexicographically within a degree block.
class Poly {
public:
  Poly() : degree_(0), coeff_(Eigen::VectorXd::Zero(1)) {}
  explicit Poly(int degree)
      : degree_(degree), coeff_(Eigen::VectorXd::Zero(space_dim(degree))) {}

  static int space_dim(int degree) {
    return (degree + 1) * (degree + 2) * (degree + 3) / 6;
  }
  static int monomial_index(int i, int j, int k);
  /// Exponents of the n-th monomial (inverse of monomial_index).
  static std::array<int, 3> monomial_exponents(int n);

  int degree() const { return degree_; }
  const Eigen::VectorXd& coefficients() const { return coeff_; }
  double& coeff(int i, int j, int k) { return coeff_(monomial_index(i, j, k)); }
  double coeff(int i, int j, int k) const { return coeff_(monomial_index(i, j, k)); }
  double& coeff_at(int n) { return coeff_(n); }

  double eval(const Eigen::Vector3d& p) const;

  Poly derivative(int axis) const;
  Poly operator*(const Poly& other) const;
  Poly operator+(const Poly& other) const;
  Poly operator-(const Poly& other) const;
  Poly operator*(double s) const;

  static Poly constant(double c);
  /// The coordinate monomial x, y, or z.
  static Poly coordinate(int axis);

private:
  int degree_;
  Eigen::VectorXd coeff_;
};

/// Monomial value table: row n = values of monomial n at all points,
/// for all monomials of total degree <= degree. Points are 3 x npts.
Eigen::MatrixXd monomial_values(int degree, const Eigen::Matrix3Xd& points);

/// Vector-valued polynomial with three Poly components.
struct VecPoly {
  std::array<Poly, 3> comp;

  VecPoly() = default;
  explicit VecPoly(int degree) : comp{Poly(degree), Poly(degree), Poly(degree)} {}

  Eigen::Vector3d eval(const Eigen::Vector3d& p) const {
    return {comp[0].eval(p), comp[1].eval(p), comp[2].eval(p)};
  }
  VecPoly curl() const;
  Poly divergence() const;
};

/// x cross v, with x the coordinate field (raises the degree by one).
VecPoly coordinate_cross(const VecPoly& v);

/// Gradient of a scalar polynomial.
VecPoly gradient(const Poly& p);

} // namespace curleq
