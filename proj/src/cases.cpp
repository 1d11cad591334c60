// SPDX-License-Identifier: Apache-2.0
#include "curleq/cases.hpp"

#include <cmath>
#include <random>

namespace curleq {

namespace {

// A3(x1,x2) = 16/pi^4 sum_{n,m odd} sin(n pi x1) sin(m pi x2) / (n m (n^2+m^2)),
// the solution of -Lap A3 = 1 with zero trace on the unit square; even
// terms of the sine expansion of 1 vanish. Returns (A3, dA3/dx1, dA3/dx2).
struct SeriesEval {
  double value, d1, d2;
};

SeriesEval const_j_series(double x1, double x2, int M) {
  // Precompute 1D tables.
  const double pi = M_PI;
  SeriesEval out{0.0, 0.0, 0.0};
  std::vector<double> s1(M + 1), c1(M + 1), s2(M + 1), c2(M + 1);
  for (int n = 1; n <= M; ++n) {
    s1[n] = std::sin(n * pi * x1);
    c1[n] = std::cos(n * pi * x1);
    s2[n] = std::sin(n * pi * x2);
    c2[n] = std::cos(n * pi * x2);
  }
  for (int n = 1; n <= M; n += 2) {
    for (int m = 1; m <= M; m += 2) {
      double denom = 1.0 / (static_cast<double>(n) * m * (static_cast<double>(n) * n + static_cast<double>(m) * m));
      out.value += s1[n] * s2[m] * denom;
      out.d1 += n * pi * c1[n] * s2[m] * denom;
      out.d2 += m * pi * s1[n] * c2[m] * denom;
    }
  }
  double scale = 16.0 / (pi * pi * pi * pi);
  out.value *= scale;
  out.d1 *= scale;
  out.d2 *= scale;
  return out;
}

} // namespace

CaseDefinition make_const_j_case(int series_m) {
  CaseDefinition c;
  c.name = "const_j";
  c.series_terms = series_m;
  c.current.eval = [](const Vec3&) { return Vec3(0, 0, 1); };
  c.current.is_piecewise_rt = true;
  c.current.rt_degree = 0;
  c.current.divergence = [](const Vec3&) { return 0.0; };
  c.has_exact = true;
  int M = series_m;
  c.exact_potential = [M](const Vec3& x) {
    SeriesEval s = const_j_series(x(0), x(1), M);
    return Vec3(0, 0, s.value);
  };
  // curl (0,0,A3) = (dA3/dx2, -dA3/dx1, 0)
  c.exact_curl = [M](const Vec3& x) {
    SeriesEval s = const_j_series(x(0), x(1), M);
    return Vec3(s.d2, -s.d1, 0);
  };
  return c;
}

CaseDefinition make_sine_case() {
  const double pi = M_PI;
  CaseDefinition c;
  c.name = "sine";
  c.current.eval = [pi](const Vec3& x) {
    return Vec3(8 * pi * pi * std::sin(2 * pi * x(1)) * std::sin(2 * pi * x(2)), 0, 0);
  };
  c.current.is_piecewise_rt = false;
  c.current.divergence = [](const Vec3&) { return 0.0; };
  c.has_exact = true;
  c.exact_potential = [pi](const Vec3& x) {
    return Vec3(std::sin(2 * pi * x(1)) * std::sin(2 * pi * x(2)), 0, 0);
  };
  c.exact_curl = [pi](const Vec3& x) {
    return Vec3(0, 2 * pi * std::sin(2 * pi * x(1)) * std::cos(2 * pi * x(2)),
                -2 * pi * std::cos(2 * pi * x(1)) * std::sin(2 * pi * x(2)));
  };
  return c;
}

namespace {

// Quintic bump: 1 on r <= 1/4, 0 on r >= 3/4, C^2 in between.
double cutoff(double r, double& d1, double& d2) {
  if (r <= 0.25) {
    d1 = d2 = 0.0;
    return 1.0;
  }
  if (r >= 0.75) {
    d1 = d2 = 0.0;
    return 0.0;
  }
  double s = (r - 0.25) * 2.0; // in (0,1)
  double ds = 2.0;
  double chi = 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
  double dchi = -(30.0 * s * s - 60.0 * s * s * s + 30.0 * s * s * s * s);
  double ddchi = -(60.0 * s - 180.0 * s * s + 120.0 * s * s * s);
  d1 = dchi * ds;
  d2 = ddchi * ds * ds;
  return chi;
}

} // namespace

CaseDefinition make_lshape_case() {
  const double alpha = 1.5;
  CaseDefinition c;
  c.name = "lshape";
  c.has_exact = true;
  // A = (0,0, chi(r) r^alpha sin(alpha theta)) on the L-shaped prism,
  // with theta in [0, 3 pi/2] measured so the re-entrant edge is at r=0.
  auto polar = [](const Vec3& x, double& r, double& theta) {
    r = std::hypot(x(0), x(1));
    theta = std::atan2(x(1), x(0));
    if (theta < 0) theta += 2 * M_PI; // range [0, 2 pi), domain uses [0, 3 pi/2]
  };
  c.exact_potential = [=](const Vec3& x) {
    double r, th;
    polar(x, r, th);
    double d1, d2;
    double chi = cutoff(r, d1, d2);
    return Vec3(0, 0, chi * std::pow(r, alpha) * std::sin(alpha * th));
  };
  c.exact_curl = [=](const Vec3& x) {
    double r, th;
    polar(x, r, th);
    double d1, d2;
    double chi = cutoff(r, d1, d2);
    if (r < 1e-14) return Vec3(0, 0, 0);
    double ra = std::pow(r, alpha);
    double f = chi * ra;
    double fr = d1 * ra + chi * alpha * std::pow(r, alpha - 1.0);
    double ft = chi * ra * alpha * std::cos(alpha * th);
    // curl (0,0,u) = (du/dy, -du/dx, 0) in Cartesian components.
    double ux = fr * std::cos(th) * std::sin(alpha * th) - ft * std::sin(th) / r;
    double uy = fr * std::sin(th) * std::sin(alpha * th) + ft * std::cos(th) / r;
    (void)f;
    return Vec3(uy, -ux, 0);
  };
  c.current.is_piecewise_rt = false;
  c.current.divergence = [](const Vec3&) { return 0.0; };
  c.current.eval = [=](const Vec3& x) {
    double r, th;
    polar(x, r, th);
    double d1, d2;
    double chi = cutoff(r, d1, d2);
    (void)chi;
    if (r < 1e-14) return Vec3(0, 0, 0);
    // -Lap(chi r^a sin(a th)) = -(chi'' r^a + (2a+1) chi' r^{a-1}) sin(a th)
    double val = -(d2 * std::pow(r, alpha) + (2 * alpha + 1) * d1 * std::pow(r, alpha - 1.0)) *
                 std::sin(alpha * th);
    return Vec3(0, 0, val);
  };
  return c;
}

std::optional<CaseDefinition> find_case(const std::string& name, int series_m) {
  if (name == "const_j") return make_const_j_case(series_m);
  if (name == "sine") return make_sine_case();
  if (name == "lshape") return make_lshape_case();
  return std::nullopt;
}

double case_self_check(const CaseDefinition& c, int samples) {
  if (!c.has_exact) return 0.0;
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.15, 0.85);
  double worst = 0.0;
  const double h = 1e-5;
  for (int s = 0; s < samples; ++s) {
    Vec3 x(u(rng), u(rng), u(rng));
    Vec3 curl_fd;
    auto A = c.exact_potential;
    // central differences of the curl components
    auto dA = [&](int comp, int axis) {
      Vec3 e = Vec3::Zero();
      e(axis) = h;
      return (A(x + e)(comp) - A(x - e)(comp)) / (2 * h);
    };
    curl_fd(0) = dA(2, 1) - dA(1, 2);
    curl_fd(1) = dA(0, 2) - dA(2, 0);
    curl_fd(2) = dA(1, 0) - dA(0, 1);
    worst = std::max(worst, (curl_fd - c.exact_curl(x)).norm());
  }
  return worst;
}

} // namespace curleq
