// SPDX-License-Identifier: Apache-2.0
#include "curleq/curl_solver.hpp"

#include "curleq/projectors.hpp"

#include <cmath>
#include <iostream>
#include <set>

namespace curleq {

Eigen::Matrix3Xd MagneticPotentialSolution::curl_at(int t, const Eigen::Matrix3Xd& pts) const {
  Eigen::VectorXd local = space.gather(t, potential);
  auto diffs = space.shapes[t]->differential(pts);
  Eigen::Matrix3Xd out(3, pts.cols());
  for (int c = 0; c < 3; ++c) out.row(c) = local.transpose() * diffs[c];
  return out;
}

Eigen::Matrix3Xd MagneticPotentialSolution::value_at(int t, const Eigen::Matrix3Xd& pts) const {
  Eigen::VectorXd local = space.gather(t, potential);
  auto vals = space.shapes[t]->values(pts);
  Eigen::Matrix3Xd out(3, pts.cols());
  for (int c = 0; c < 3; ++c) out.row(c) = local.transpose() * vals[c];
  return out;
}

MagneticPotentialSolution solve_magnetic_potential(const TetMesh& mesh, ShapeRegistry& registry,
                                                   int p, const CurrentDensity& j,
                                                   const QuadConfig& quad,
                                                   double multiplier_tol) {
  MagneticPotentialSolution sol;
  sol.degree = p;
  sol.space = build_space_bc(mesh, SpaceKind::Nedelec, p, registry, BoundaryTag::Dirichlet);
  sol.gauge_space =
      build_space_bc(mesh, SpaceKind::Lagrange, p + 1, registry, BoundaryTag::Dirichlet);
  const int nv = sol.space.n_free;
  const int nq = sol.gauge_space.n_free;

  // Stiffness (curl, curl), gradient coupling (v, grad r), and the
  // multiplier-space stiffness used for the norm diagnostic.
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<Eigen::Triplet<double>> grad_stiff_trips;
  QuadratureRule vol_rule = gauss_rule_tet(quad.volume(p + 1));
  for (int t = 0; t < mesh.n_tets(); ++t) {
    MappedRule mr = map_to_tet(vol_rule, mesh.tet_vertices(t));
    auto curls = sol.space.shapes[t]->differential(mr.points);
    auto grads = sol.gauge_space.shapes[t]->differential(mr.points);
    auto vals = sol.space.shapes[t]->values(mr.points);

    int nk = sol.space.ndof_element(t);
    int nr = sol.gauge_space.ndof_element(t);
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nk, nk);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(nk, nr);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(nr, nr);
    for (int c = 0; c < 3; ++c) {
      K += curls[c] * mr.weights.asDiagonal() * curls[c].transpose();
      G += vals[c] * mr.weights.asDiagonal() * grads[c].transpose();
      S += grads[c] * mr.weights.asDiagonal() * grads[c].transpose();
    }
    const auto& vd = sol.space.element_dofs[t];
    const auto& qd = sol.gauge_space.element_dofs[t];
    for (int i = 0; i < nk; ++i) {
      if (vd[i] < 0) continue;
      for (int k = 0; k < nk; ++k)
        if (vd[k] >= 0) trips.emplace_back(vd[i], vd[k], K(i, k));
      for (int r = 0; r < nr; ++r)
        if (qd[r] >= 0) {
          trips.emplace_back(vd[i], nv + qd[r], G(i, r));
          trips.emplace_back(nv + qd[r], vd[i], G(i, r));
        }
    }
    for (int i = 0; i < nr; ++i)
      if (qd[i] >= 0)
        for (int k = 0; k < nr; ++k)
          if (qd[k] >= 0) grad_stiff_trips.emplace_back(qd[i], qd[k], S(i, k));
  }

  // Small negative regularization on the multiplier block keeps the
  // factorization well posed when the gauge space contains constants
  // (pure Neumann boundaries); it perturbs (A_h, grad r) = 0 at the
  // 1e-12 level only.
  double diag_scale = 0.0;
  Eigen::SparseMatrix<double> grad_stiffness(nq, nq);
  grad_stiffness.setFromTriplets(grad_stiff_trips.begin(), grad_stiff_trips.end());
  {
    Eigen::SparseMatrix<double> probe(nv + nq, nv + nq);
    probe.setFromTriplets(trips.begin(), trips.end());
    for (int i = 0; i < nv; ++i) diag_scale = std::max(diag_scale, probe.coeff(i, i));
  }
  if (diag_scale <= 0) diag_scale = 1.0;
  for (int i = 0; i < nq; ++i) trips.emplace_back(nv + i, nv + i, -1e-12 * diag_scale);

  SparseSymMatrix saddle;
  saddle.mat.resize(nv + nq, nv + nq);
  saddle.mat.setFromTriplets(trips.begin(), trips.end());
  saddle.symmetric = false; // singular leading block: go straight to LU

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv + nq);
  rhs.head(nv) = assemble_load(sol.space, j.eval, quad.data(p));
  sol.rhs_norm = rhs.norm();

  Eigen::MatrixXd x = factor_solve(saddle, rhs);
  sol.potential = x.col(0).head(nv);
  sol.multiplier = x.col(0).tail(nq);

  Eigen::VectorXd resid = saddle.mat * x.col(0) - rhs;
  sol.galerkin_residual =
      resid.head(nv).cwiseAbs().maxCoeff() / std::max(1e-300, sol.rhs_norm);
  sol.multiplier_norm = std::sqrt(std::max(
      0.0, sol.multiplier.dot(grad_stiffness * sol.multiplier)));
  sol.compatibility_warning =
      sol.multiplier_norm > multiplier_tol * std::max(1e-300, sol.rhs_norm);
  if (sol.compatibility_warning)
    std::cerr << "[curl_solver] warning: gauge multiplier norm " << sol.multiplier_norm
              << " exceeds tolerance; data may not be discretely divergence-free\n";
  return sol;
}

double patch_orthogonality_residual(const TetMesh& mesh, const VertexPatch& patch,
                                    const MagneticPotentialSolution& sol,
                                    const CurrentDensity& j, const QuadConfig& quad) {
  const int a = patch.center;

  // Admissible test functions: hats of patch vertices; for Dirichlet
  // vertices only those vanishing on gamma_D. Constant shifts do not
  // change the residual, so the zero-mean constraint needs no handling.
  std::set<int> patch_vertices;
  for (int t : patch.tets)
    for (int v : mesh.tets[t]) patch_vertices.insert(v);
  std::set<int> gamma_d_vertices;
  for (int f : patch.gamma_d_faces)
    for (int v : mesh.faces[f].v) gamma_d_vertices.insert(v);

  QuadratureRule data_rule = gauss_rule_tet(quad.data(sol.degree));

  double worst = 0.0;
  for (int b : patch_vertices) {
    if (gamma_d_vertices.count(b)) continue;
    double residual = 0.0;
    double scale_j = 0.0, scale_tau = 0.0, grad_b_norm = 0.0;
    for (int t : patch.tets) {
      auto gb = mesh.barycentric_gradients(t);
      int loc_a = -1, loc_b = -1;
      for (int i = 0; i < 4; ++i) {
        if (mesh.tets[t][i] == a) loc_a = i;
        if (mesh.tets[t][i] == b) loc_b = i;
      }
      Vec3 grad_a = gb.col(loc_a);
      Vec3 grad_b = loc_b >= 0 ? Vec3(gb.col(loc_b)) : Vec3::Zero();
      if (loc_b < 0) continue;

      MappedRule mr = map_to_tet(data_rule, mesh.tet_vertices(t));
      Eigen::Matrix3Xd curl_a = sol.curl_at(t, mr.points);
      for (int qp = 0; qp < mr.weights.size(); ++qp) {
        auto [psi_a, ga] = hat_eval(mesh, a, t, mr.points.col(qp));
        Vec3 jv = j.eval(mr.points.col(qp));
        Vec3 tau = grad_a.cross(Vec3(curl_a.col(qp)));
        residual += mr.weights(qp) * (psi_a * jv.dot(grad_b) + tau.dot(grad_b));
        scale_j += mr.weights(qp) * (psi_a * jv).squaredNorm();
        scale_tau += mr.weights(qp) * tau.squaredNorm();
      }
      grad_b_norm = std::max(grad_b_norm, grad_b.norm());
    }
    double scale = (std::sqrt(scale_j) + std::sqrt(scale_tau)) * grad_b_norm + 1e-300;
    worst = std::max(worst, std::abs(residual) / scale);
  }
  return worst;
}

OrthogonalityReport check_patch_orthogonality(const TetMesh& mesh,
                                              const MagneticPotentialSolution& sol,
                                              const CurrentDensity& j, const QuadConfig& quad) {
  OrthogonalityReport rep;
  for (int a = 0; a < mesh.n_vertices(); ++a) {
    VertexPatch patch = vertex_patch(mesh, a);
    double r = patch_orthogonality_residual(mesh, patch, sol, j, quad);
    if (r > rep.max_scaled_residual) {
      rep.max_scaled_residual = r;
      rep.worst_vertex = a;
    }
  }
  return rep;
}

RtDataCheck validate_rt_current(const TetMesh& mesh, ShapeRegistry& registry,
                                const CurrentDensity& j, const QuadConfig& quad) {
  RtDataCheck check;
  int q = j.rt_degree;
  int exact = quad.data(q);
  std::vector<ElementField> interp(mesh.n_tets());
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const ElementShapeSet& rt = registry.get(SpaceKind::RaviartThomas, q, t);
    interp[t] = rt_interpolate(rt, j.eval, exact);
    MappedRule mr = map_to_tet(gauss_rule_tet(exact), mesh.tet_vertices(t));
    auto vals = rt.values(mr.points);
    auto divs = rt.differential(mr.points);
    for (int qp = 0; qp < mr.weights.size(); ++qp) {
      Vec3 approx(interp[t].coeffs.dot(vals[0].col(qp)), interp[t].coeffs.dot(vals[1].col(qp)),
                  interp[t].coeffs.dot(vals[2].col(qp)));
      check.max_interpolation_error =
          std::max(check.max_interpolation_error, (approx - j.eval(mr.points.col(qp))).norm());
      check.max_divergence =
          std::max(check.max_divergence, std::abs(interp[t].coeffs.dot(divs[0].col(qp))));
    }
  }
  QuadratureRule tri = gauss_rule_triangle(2 * q + 2);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& face = mesh.faces[f];
    if (face.on_boundary()) continue;
    Eigen::Matrix3d corners;
    for (int i = 0; i < 3; ++i) corners.col(i) = mesh.vertices[face.v[i]];
    MappedRule mr = map_to_triangle(tri, corners);
    Vec3 n = (corners.col(1) - corners.col(0)).cross(corners.col(2) - corners.col(0)).normalized();
    for (int qp = 0; qp < mr.weights.size(); ++qp) {
      Vec3 x = mr.points.col(qp);
      double jump = (interp[face.owner].eval(x) - interp[face.neighbor].eval(x)).dot(n);
      check.max_normal_jump = std::max(check.max_normal_jump, std::abs(jump));
    }
  }
  return check;
}

} // namespace curleq
