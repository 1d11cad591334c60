// SPDX-License-Identifier: Apache-2.0
#include "curleq/shape_set.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace curleq {

namespace {

constexpr std::array<std::array<int, 2>, 6> kEdgeSlots = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

int nmono_2d(int d) { return d < 0 ? 0 : (d + 1) * (d + 2) / 2; }
int nmono_3d(int d) { return d < 0 ? 0 : Poly::space_dim(d); }
int homogeneous_3d(int d) { return (d + 1) * (d + 2) / 2; }

// ---------------------------------------------------------------------------
// Spanning sets over scaled monomials, cached per (kind, degree).

struct SpanTable {
  int nspan = 0;
  int nmono = 0;
  int maxdeg = 0;
  std::vector<Eigen::MatrixXd> val;  // per component, nspan x nmono
  std::vector<Eigen::MatrixXd> diff; // curl (3) / div (1) / grad (3), in xi coords
};

void fill_row(Eigen::MatrixXd& m, int row, const Poly& p) {
  m.row(row).head(p.coefficients().size()) = p.coefficients().transpose();
}

SpanTable build_span_table(SpaceKind kind, int q) {
  SpanTable t;
  if (kind == SpaceKind::Lagrange) {
    t.maxdeg = q;
    t.nmono = nmono_3d(q);
    t.nspan = t.nmono;
    t.val.assign(1, Eigen::MatrixXd::Zero(t.nspan, t.nmono));
    t.diff.assign(3, Eigen::MatrixXd::Zero(t.nspan, t.nmono));
    t.val[0].setIdentity();
    for (int n = 0; n < t.nspan; ++n) {
      Poly p(q);
      p.coeff_at(n) = 1.0;
      for (int c = 0; c < 3; ++c) fill_row(t.diff[c], n, p.derivative(c));
    }
    return t;
  }

  const bool nd = (kind == SpaceKind::Nedelec);
  t.maxdeg = q + 1;
  t.nmono = nmono_3d(q + 1);
  int nhom = homogeneous_3d(q);
  t.nspan = 3 * nmono_3d(q) + (nd ? 3 * nhom : nhom);
  t.val.assign(3, Eigen::MatrixXd::Zero(t.nspan, t.nmono));
  t.diff.assign(nd ? 3 : 1, Eigen::MatrixXd::Zero(t.nspan, t.nmono));

  int row = 0;
  for (int n = 0; n < nmono_3d(q); ++n)
    for (int c = 0; c < 3; ++c, ++row) {
      VecPoly v(q);
      v.comp[c].coeff_at(n) = 1.0;
      for (int cc = 0; cc < 3; ++cc) fill_row(t.val[cc], row, v.comp[cc]);
      if (nd) {
        VecPoly cu = v.curl();
        for (int cc = 0; cc < 3; ++cc) fill_row(t.diff[cc], row, cu.comp[cc]);
      } else {
        fill_row(t.diff[0], row, v.divergence());
      }
    }

  // Homogeneous complement of top degree q: x cross (m e_c) for Nedelec,
  // m x for Raviart-Thomas, with m running over degree-q monomials.
  int hom_begin = nmono_3d(q - 1);
  for (int n = hom_begin; n < nmono_3d(q); ++n) {
    Poly m(q);
    m.coeff_at(n) = 1.0;
    if (nd) {
      for (int c = 0; c < 3; ++c, ++row) {
        VecPoly v;
        v.comp[c] = m;
        VecPoly s = coordinate_cross(v);
        for (int cc = 0; cc < 3; ++cc) fill_row(t.val[cc], row, s.comp[cc]);
        VecPoly cu = s.curl();
        for (int cc = 0; cc < 3; ++cc) fill_row(t.diff[cc], row, cu.comp[cc]);
      }
    } else {
      VecPoly s;
      for (int c = 0; c < 3; ++c) s.comp[c] = m * Poly::coordinate(c);
      for (int cc = 0; cc < 3; ++cc) fill_row(t.val[cc], row, s.comp[cc]);
      fill_row(t.diff[0], row, s.divergence());
      ++row;
    }
  }
  if (row != t.nspan) throw std::logic_error("span table size mismatch");
  return t;
}

const SpanTable& span_table(SpaceKind kind, int q) {
  static std::map<std::pair<int, int>, SpanTable> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(static_cast<int>(kind), q);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build_span_table(kind, q)).first;
  return it->second;
}

// ---------------------------------------------------------------------------
// Orthonormalized moment bases on reference entities (segment, triangle, tet),
// with respect to the measure-normalized L2 inner product.

std::vector<std::array<int, 2>> monomials_2d(int d) {
  std::vector<std::array<int, 2>> out;
  for (int deg = 0; deg <= d; ++deg)
    for (int i = deg; i >= 0; --i) out.push_back({i, deg - i});
  return out;
}

Eigen::MatrixXd monomial_values_entity(int dim, int degree, const Eigen::MatrixXd& ref_pts) {
  int npts = static_cast<int>(ref_pts.rows());
  if (dim == 1) {
    Eigen::MatrixXd out(degree + 1, npts);
    for (int q = 0; q < npts; ++q) {
      double v = 1.0;
      for (int k = 0; k <= degree; ++k) {
        out(k, q) = v;
        v *= ref_pts(q, 0);
      }
    }
    return out;
  }
  if (dim == 2) {
    auto mono = monomials_2d(degree);
    Eigen::MatrixXd out(mono.size(), npts);
    for (int q = 0; q < npts; ++q) {
      for (size_t k = 0; k < mono.size(); ++k)
        out(k, q) = std::pow(ref_pts(q, 0), mono[k][0]) * std::pow(ref_pts(q, 1), mono[k][1]);
    }
    return out;
  }
  Eigen::Matrix3Xd pts(3, npts);
  for (int q = 0; q < npts; ++q) pts.col(q) = ref_pts.row(q).head<3>().transpose();
  return monomial_values(degree, pts);
}

// Coefficients of the orthonormalized basis over entity monomials.
const Eigen::MatrixXd& moment_basis(int dim, int degree) {
  static std::map<std::pair<int, int>, Eigen::MatrixXd> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(dim, degree);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  QuadratureRule rule = dim == 1   ? gauss_rule_segment(2 * degree)
                        : dim == 2 ? gauss_rule_triangle(2 * degree)
                                   : gauss_rule_tet(2 * degree);
  Eigen::MatrixXd M = monomial_values_entity(dim, degree, rule.points);
  double measure = rule.weights.sum();
  Eigen::MatrixXd G = M * (rule.weights / measure).asDiagonal() * M.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) throw std::runtime_error("moment basis Gram not SPD");
  Eigen::MatrixXd B =
      llt.matrixL().solve(Eigen::MatrixXd::Identity(G.rows(), G.cols()));
  return cache.emplace(key, std::move(B)).first->second;
}

Eigen::MatrixXd moment_values(int dim, int degree, const Eigen::MatrixXd& ref_pts) {
  return moment_basis(dim, degree) * monomial_values_entity(dim, degree, ref_pts);
}

} // namespace

int space_dimension(SpaceKind kind, int degree) {
  int q = degree;
  switch (kind) {
    case SpaceKind::Lagrange: return (q + 1) * (q + 2) * (q + 3) / 6;
    case SpaceKind::Nedelec: return (q + 1) * (q + 3) * (q + 4) / 2;
    case SpaceKind::RaviartThomas: return (q + 1) * (q + 2) * (q + 4) / 2;
  }
  return 0;
}

std::array<int, 4> dofs_per_entity(SpaceKind kind, int degree) {
  int q = degree;
  switch (kind) {
    case SpaceKind::Lagrange:
      return {1, std::max(0, q - 1), nmono_2d(q - 3), nmono_3d(q - 4)};
    case SpaceKind::Nedelec:
      return {0, q + 1, 2 * nmono_2d(q - 1), 3 * nmono_3d(q - 2)};
    case SpaceKind::RaviartThomas:
      return {0, 0, nmono_2d(q), 3 * nmono_3d(q - 1)};
  }
  return {0, 0, 0, 0};
}

ElementShapeSet::ElementShapeSet(SpaceKind kind, int degree,
                                 const Eigen::Matrix<double, 3, 4>& verts,
                                 const std::array<int, 4>& global_vertex_ids)
    : kind_(kind), degree_(degree), verts_(verts), gids_(global_vertex_ids) {
  if (degree < 0 || (kind == SpaceKind::Lagrange && degree < 1))
    throw std::invalid_argument("ElementShapeSet: invalid degree");
  ndof_ = space_dimension(kind, degree);
  centroid_ = verts.rowwise().mean();
  scale_ = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      scale_ = std::max(scale_, (verts.col(i) - verts.col(j)).norm());
  max_poly_degree_ = (kind == SpaceKind::Lagrange) ? degree : degree + 1;
  build();
}

Eigen::MatrixXd ElementShapeSet::monomials_at(const Eigen::Matrix3Xd& points) const {
  Eigen::Matrix3Xd xi = (points.colwise() - centroid_) / scale_;
  return monomial_values(max_poly_degree_, xi);
}

namespace {

// Shared driver: enumerate the DOF blocks of a shape set in canonical order.
// For each entity block it reports the quadrature (reference parameters,
// physical points, normalized weights) and the directional data needed to
// form the functionals.
struct EntityBlock {
  DofKey first_key;           // dim/slot of the block
  int n_moments;              // scalar moment count of the block
  int families;               // 1, 2 (ND face tangents), or 3 (cell components)
  int moment_degree;
  Eigen::MatrixXd ref_pts;    // npts x dim
  Eigen::Matrix3Xd phys_pts;  // 3 x npts
  Eigen::VectorXd weights;    // normalized: sums to 1
  std::array<Eigen::Vector3d, 3> dirs; // family directions (unit where relevant)
};

} // namespace

// Enumerate entity blocks for the element in DOF order; exactness controls
// the entity quadrature used.
template <typename Fn>
static void for_each_block(SpaceKind kind, int degree, const Eigen::Matrix<double, 3, 4>& verts,
                           const std::array<int, 4>& gids, int exactness, Fn&& fn) {
  auto per = dofs_per_entity(kind, degree);

  if (per[0] > 0) { // Lagrange vertices: point evaluation
    for (int v = 0; v < 4; ++v) {
      EntityBlock b;
      b.first_key = {0, v, 0};
      b.n_moments = 1;
      b.families = 1;
      b.moment_degree = 0;
      b.ref_pts = Eigen::MatrixXd::Zero(1, 1);
      b.phys_pts = verts.col(v);
      b.weights = Eigen::VectorXd::Ones(1);
      fn(b);
    }
  }

  if (per[1] > 0) {
    QuadratureRule rule = gauss_rule_segment(exactness);
    int moment_degree = (kind == SpaceKind::Lagrange) ? degree - 2 : degree;
    for (int s = 0; s < 6; ++s) {
      int la = kEdgeSlots[s][0], lb = kEdgeSlots[s][1];
      if (gids[la] > gids[lb]) std::swap(la, lb);
      EntityBlock b;
      b.first_key = {1, s, 0};
      b.n_moments = per[1];
      b.families = 1;
      b.moment_degree = moment_degree;
      b.ref_pts = rule.points;
      MappedRule m = map_to_segment(rule, verts.col(la), verts.col(lb));
      b.phys_pts = m.points;
      b.weights = m.weights / m.weights.sum();
      b.dirs[0] = (verts.col(lb) - verts.col(la)).normalized();
      fn(b);
    }
  }

  if (per[2] > 0) {
    QuadratureRule rule = gauss_rule_triangle(exactness);
    int moment_degree = kind == SpaceKind::Lagrange    ? degree - 3
                        : kind == SpaceKind::Nedelec   ? degree - 1
                                                       : degree;
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> loc{(f + 1) % 4, (f + 2) % 4, (f + 3) % 4};
      std::sort(loc.begin(), loc.end(), [&](int a, int b) { return gids[a] < gids[b]; });
      Eigen::Matrix3d corners;
      for (int i = 0; i < 3; ++i) corners.col(i) = verts.col(loc[i]);
      EntityBlock b;
      b.first_key = {2, f, 0};
      b.n_moments = per[2];
      b.families = (kind == SpaceKind::Nedelec) ? 2 : 1;
      b.moment_degree = moment_degree;
      b.ref_pts = rule.points;
      MappedRule m = map_to_triangle(rule, corners);
      b.phys_pts = m.points;
      b.weights = m.weights / m.weights.sum();
      Eigen::Vector3d e1 = corners.col(1) - corners.col(0);
      Eigen::Vector3d e2 = corners.col(2) - corners.col(0);
      if (kind == SpaceKind::Nedelec) {
        b.dirs[0] = e1.normalized();
        b.dirs[1] = e2.normalized();
      } else if (kind == SpaceKind::RaviartThomas) {
        b.dirs[0] = e1.cross(e2).normalized();
      }
      fn(b);
    }
  }

  if (per[3] > 0) {
    QuadratureRule rule = gauss_rule_tet(exactness);
    int moment_degree = kind == SpaceKind::Lagrange         ? degree - 4
                        : kind == SpaceKind::Nedelec        ? degree - 2
                                                            : degree - 1;
    EntityBlock b;
    b.first_key = {3, 0, 0};
    b.n_moments = per[3];
    b.families = is_vector_kind(kind) ? 3 : 1;
    b.moment_degree = moment_degree;
    b.ref_pts = rule.points;
    MappedRule m = map_to_tet(rule, verts);
    b.phys_pts = m.points;
    b.weights = m.weights / m.weights.sum();
    b.dirs[0] = Eigen::Vector3d::UnitX();
    b.dirs[1] = Eigen::Vector3d::UnitY();
    b.dirs[2] = Eigen::Vector3d::UnitZ();
    fn(b);
  }
}

void ElementShapeSet::build() {
  const SpanTable& span = span_table(kind_, degree_);
  const int nspan = span.nspan;

  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(ndof_, nspan);
  keys_.clear();
  keys_.reserve(ndof_);
  int row0 = 0;
  int exactness = 2 * max_poly_degree_ + 2;

  for_each_block(kind_, degree_, verts_, gids_, exactness, [&](const EntityBlock& b) {
    Eigen::MatrixXd mono = monomials_at(b.phys_pts);
    // Span component values at the block's points.
    std::vector<Eigen::MatrixXd> sv(span.val.size());
    for (size_t c = 0; c < span.val.size(); ++c) sv[c] = span.val[c] * mono;

    if (b.first_key.dim == 0) {
      D.row(row0) = sv[0].col(0).transpose();
      keys_.push_back(b.first_key);
      row0 += 1;
      return;
    }
    Eigen::MatrixXd phi = moment_values(b.first_key.dim, b.moment_degree, b.ref_pts);
    int nfun = static_cast<int>(phi.rows());
    for (int d = 0; d < b.families; ++d) {
      Eigen::MatrixXd trace;
      if (kind_ == SpaceKind::Lagrange) {
        trace = sv[0];
      } else {
        trace = b.dirs[d](0) * sv[0] + b.dirs[d](1) * sv[1] + b.dirs[d](2) * sv[2];
      }
      Eigen::MatrixXd rows = phi * b.weights.asDiagonal() * trace.transpose();
      for (int m = 0; m < nfun; ++m)
        D.row(row0 + m * b.families + d) = rows.row(m);
    }
    for (int m = 0; m < nfun; ++m)
      for (int d = 0; d < b.families; ++d)
        keys_.push_back({b.first_key.dim, b.first_key.slot, m * b.families + d});
    row0 += nfun * b.families;
  });

  if (row0 != ndof_) throw std::logic_error("dof count mismatch");

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(D);
  if (cod.rank() < ndof_)
    throw std::runtime_error("ElementShapeSet: DOF functionals not unisolvent");
  Eigen::MatrixXd X = cod.solve(Eigen::MatrixXd::Identity(ndof_, ndof_)); // nspan x ndof

  val_.resize(span.val.size());
  for (size_t c = 0; c < span.val.size(); ++c) val_[c] = X.transpose() * span.val[c];
  diff_.resize(span.diff.size());
  for (size_t c = 0; c < span.diff.size(); ++c)
    diff_[c] = (X.transpose() * span.diff[c]) / scale_;
}

std::vector<Eigen::MatrixXd> ElementShapeSet::values(const Eigen::Matrix3Xd& points) const {
  Eigen::MatrixXd mono = monomials_at(points);
  std::vector<Eigen::MatrixXd> out(val_.size());
  for (size_t c = 0; c < val_.size(); ++c) out[c] = val_[c] * mono;
  return out;
}

std::vector<Eigen::MatrixXd> ElementShapeSet::differential(const Eigen::Matrix3Xd& points) const {
  Eigen::MatrixXd mono = monomials_at(points);
  std::vector<Eigen::MatrixXd> out(diff_.size());
  for (size_t c = 0; c < diff_.size(); ++c) out[c] = diff_[c] * mono;
  return out;
}

Eigen::VectorXd ElementShapeSet::apply_dofs(const std::function<Vec3(const Vec3&)>& field,
                                            int exactness) const {
  if (kind_ == SpaceKind::Lagrange)
    throw std::invalid_argument("apply_dofs: vector field on a scalar space");
  Eigen::VectorXd out(ndof_);
  int row0 = 0;
  for_each_block(kind_, degree_, verts_, gids_, exactness, [&](const EntityBlock& b) {
    int npts = static_cast<int>(b.weights.size());
    Eigen::Matrix3Xd F(3, npts);
    for (int q = 0; q < npts; ++q) F.col(q) = field(b.phys_pts.col(q));
    Eigen::MatrixXd phi = moment_values(b.first_key.dim, b.moment_degree, b.ref_pts);
    int nfun = static_cast<int>(phi.rows());
    for (int d = 0; d < b.families; ++d) {
      Eigen::VectorXd trace = F.transpose() * b.dirs[d];
      Eigen::VectorXd vals = phi * b.weights.asDiagonal() * trace;
      for (int m = 0; m < nfun; ++m) out(row0 + m * b.families + d) = vals(m);
    }
    row0 += nfun * b.families;
  });
  return out;
}

Eigen::VectorXd ElementShapeSet::apply_dofs_scalar(const std::function<double(const Vec3&)>& field,
                                                   int exactness) const {
  if (kind_ != SpaceKind::Lagrange)
    throw std::invalid_argument("apply_dofs_scalar: scalar field on a vector space");
  Eigen::VectorXd out(ndof_);
  int row0 = 0;
  for_each_block(kind_, degree_, verts_, gids_, exactness, [&](const EntityBlock& b) {
    int npts = static_cast<int>(b.weights.size());
    Eigen::VectorXd F(npts);
    for (int q = 0; q < npts; ++q) F(q) = field(b.phys_pts.col(q));
    if (b.first_key.dim == 0) {
      out(row0++) = F(0);
      return;
    }
    Eigen::MatrixXd phi = moment_values(b.first_key.dim, b.moment_degree, b.ref_pts);
    Eigen::VectorXd vals = phi * b.weights.asDiagonal() * F;
    for (int m = 0; m < vals.size(); ++m) out(row0 + m) = vals(m);
    row0 += static_cast<int>(vals.size());
  });
  return out;
}

double ElementShapeSet::unisolvence_residual() const {
  double worst = 0.0;
  for (int k = 0; k < ndof_; ++k) {
    Eigen::VectorXd dofs;
    if (kind_ == SpaceKind::Lagrange) {
      dofs = apply_dofs_scalar(
          [&](const Vec3& x) {
            Eigen::Matrix3Xd p(3, 1);
            p.col(0) = x;
            return values(p)[0](k, 0);
          },
          2 * max_poly_degree_ + 4);
    } else {
      dofs = apply_dofs(
          [&](const Vec3& x) -> Vec3 {
            Eigen::Matrix3Xd p(3, 1);
            p.col(0) = x;
            auto v = values(p);
            return {v[0](k, 0), v[1](k, 0), v[2](k, 0)};
          },
          2 * max_poly_degree_ + 4);
    }
    dofs(k) -= 1.0;
    worst = std::max(worst, dofs.cwiseAbs().maxCoeff());
  }
  return worst;
}

} // namespace curleq
