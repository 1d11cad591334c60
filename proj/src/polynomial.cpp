// SPDX-License-Identifier: Apache-2.0
#include "curleq/polynomial.hpp"

#include <stdexcept>

namespace curleq {

int Poly::monomial_index(int i, int j, int k) {
  int d = i + j + k;
  int offset = d * (d + 1) * (d + 2) / 6; // monomials of degree < d
  // Within a degree block, order by i descending, then j descending.
  // Position: sum over i' > i of (d - i' + 1) terms, then (d - i - j).
  int pos = 0;
  for (int ii = d; ii > i; --ii) pos += d - ii + 1;
  pos += d - i - j;
  return offset + pos;
}

std::array<int, 3> Poly::monomial_exponents(int n) {
  int d = 0;
  while ((d + 1) * (d + 2) * (d + 3) / 6 <= n) ++d;
  int rem = n - d * (d + 1) * (d + 2) / 6;
  int i = d;
  while (rem >= d - i + 1) {
    rem -= d - i + 1;
    --i;
  }
  int j = d - i - rem;
  return {i, j, d - i - j};
}

double Poly::eval(const Eigen::Vector3d& p) const {
  // Power tables up to degree_.
  std::array<std::vector<double>, 3> pw;
  for (int c = 0; c < 3; ++c) {
    pw[c].resize(degree_ + 1);
    pw[c][0] = 1.0;
    for (int d = 1; d <= degree_; ++d) pw[c][d] = pw[c][d - 1] * p(c);
  }
  double s = 0.0;
  for (int n = 0; n < coeff_.size(); ++n) {
    if (coeff_(n) == 0.0) continue;
    auto e = monomial_exponents(n);
    s += coeff_(n) * pw[0][e[0]] * pw[1][e[1]] * pw[2][e[2]];
  }
  return s;
}

Poly Poly::derivative(int axis) const {
  Poly out(std::max(0, degree_ - 1));
  for (int n = 0; n < coeff_.size(); ++n) {
    if (coeff_(n) == 0.0) continue;
    auto e = monomial_exponents(n);
    if (e[axis] == 0) continue;
    double c = coeff_(n) * e[axis];
    e[axis] -= 1;
    out.coeff(e[0], e[1], e[2]) += c;
  }
  return out;
}

Poly Poly::operator*(const Poly& other) const {
  Poly out(degree_ + other.degree_);
  for (int n = 0; n < coeff_.size(); ++n) {
    if (coeff_(n) == 0.0) continue;
    auto a = monomial_exponents(n);
    for (int m = 0; m < other.coeff_.size(); ++m) {
      if (other.coeff_(m) == 0.0) continue;
      auto b = monomial_exponents(m);
      out.coeff(a[0] + b[0], a[1] + b[1], a[2] + b[2]) += coeff_(n) * other.coeff_(m);
    }
  }
  return out;
}

Poly Poly::operator+(const Poly& other) const {
  Poly out(std::max(degree_, other.degree_));
  out.coeff_.head(coeff_.size()) += coeff_;
  out.coeff_.head(other.coeff_.size()) += other.coeff_;
  return out;
}

Poly Poly::operator-(const Poly& other) const {
  Poly out(std::max(degree_, other.degree_));
  out.coeff_.head(coeff_.size()) += coeff_;
  out.coeff_.head(other.coeff_.size()) -= other.coeff_;
  return out;
}

Poly Poly::operator*(double s) const {
  Poly out = *this;
  out.coeff_ *= s;
  return out;
}

Poly Poly::constant(double c) {
  Poly p(0);
  p.coeff_(0) = c;
  return p;
}

Poly Poly::coordinate(int axis) {
  Poly p(1);
  int e[3] = {0, 0, 0};
  e[axis] = 1;
  p.coeff(e[0], e[1], e[2]) = 1.0;
  return p;
}

Eigen::MatrixXd monomial_values(int degree, const Eigen::Matrix3Xd& points) {
  const int nmono = Poly::space_dim(degree);
  const int npts = static_cast<int>(points.cols());
  Eigen::MatrixXd out(nmono, npts);
  std::vector<double> px(degree + 1), py(degree + 1), pz(degree + 1);
  for (int q = 0; q < npts; ++q) {
    px[0] = py[0] = pz[0] = 1.0;
    for (int d = 1; d <= degree; ++d) {
      px[d] = px[d - 1] * points(0, q);
      py[d] = py[d - 1] * points(1, q);
      pz[d] = pz[d - 1] * points(2, q);
    }
    for (int n = 0; n < nmono; ++n) {
      auto e = Poly::monomial_exponents(n);
      out(n, q) = px[e[0]] * py[e[1]] * pz[e[2]];
    }
  }
  return out;
}

VecPoly VecPoly::curl() const {
  VecPoly out;
  out.comp[0] = comp[2].derivative(1) - comp[1].derivative(2);
  out.comp[1] = comp[0].derivative(2) - comp[2].derivative(0);
  out.comp[2] = comp[1].derivative(0) - comp[0].derivative(1);
  return out;
}

Poly VecPoly::divergence() const {
  return comp[0].derivative(0) + comp[1].derivative(1) + comp[2].derivative(2);
}

VecPoly coordinate_cross(const VecPoly& v) {
  Poly x = Poly::coordinate(0), y = Poly::coordinate(1), z = Poly::coordinate(2);
  VecPoly out;
  out.comp[0] = y * v.comp[2] - z * v.comp[1];
  out.comp[1] = z * v.comp[0] - x * v.comp[2];
  out.comp[2] = x * v.comp[1] - y * v.comp[0];
  return out;
}

VecPoly gradient(const Poly& p) {
  VecPoly out;
  for (int c = 0; c < 3; ++c) out.comp[c] = p.derivative(c);
  return out;
}

} // namespace curleq
