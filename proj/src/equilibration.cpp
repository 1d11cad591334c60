// SPDX-License-Identifier: Apache-2.0
#include "curleq/equilibration.hpp"

#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>
#include <thread>

namespace curleq {

int p_hat_for(int p) { return std::max(p, 1); }

namespace {

// Scaled monomial table of one parent element (nmono x npts); used as the
// broken test basis for divergence constraints.
Eigen::MatrixXd scaled_monomials(const TetMesh& mesh, int t, int degree,
                                 const Eigen::Matrix3Xd& pts) {
  Vec3 c = mesh.tet_centroid(t);
  double h = mesh.h_tet[t];
  Eigen::Matrix3Xd xi = (pts.colwise() - c) / h;
  return monomial_values(degree, xi);
}

void parallel_over(int n, int n_threads, const std::function<void(int)>& fn) {
  if (n_threads <= 0) n_threads = std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, n);
  if (n_threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mtx;
  auto worker = [&]() {
    while (true) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mtx);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 0; k < n_threads; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

void maybe_record(const ProblemRecorder& rec, const EquilibrationConfig& cfg,
                  const std::string& tag, const ConstrainedLsProblem& problem,
                  const ConstrainedLsSolution& sol) {
  if (rec) {
    ProblemRecord r;
    r.tag = tag;
    r.problem = problem;
    r.solution = sol.v;
    r.objective = sol.objective;
    rec(std::move(r));
  }
  if (!cfg.dump_dir.empty()) dump_problem(problem, cfg.dump_dir + "/" + tag + ".txt");
}

Eigen::SparseMatrix<double> triplets_to_sparse(int rows, int cols,
                                               std::vector<Eigen::Triplet<double>>& trips) {
  Eigen::SparseMatrix<double> S(rows, cols);
  S.setFromTriplets(trips.begin(), trips.end());
  return S;
}

// grad psi_a x curl A_h at points of a parent tet.
Eigen::Matrix3Xd theta_target(const TetMesh& mesh, int vertex, int parent_tet,
                              const MagneticPotentialSolution& sol,
                              const Eigen::Matrix3Xd& pts) {
  auto [val0, grad_a] = hat_eval(mesh, vertex, parent_tet, pts.col(0));
  (void)val0;
  Eigen::Matrix3Xd curl = sol.curl_at(parent_tet, pts);
  Eigen::Matrix3Xd out(3, pts.cols());
  for (int q = 0; q < pts.cols(); ++q) out.col(q) = grad_a.cross(Vec3(curl.col(q)));
  return out;
}

} // namespace

ThetaPatch solve_theta_patch(const TetMesh& mesh, ShapeRegistry& registry,
                             const VertexPatch& patch, const MagneticPotentialSolution& sol,
                             const CurrentDensity& j, const EquilibrationConfig& cfg,
                             const ProblemRecorder& rec) {
  const int p = sol.degree;
  const int p_hat = p_hat_for(p);
  const int a = patch.center;

  ThetaPatch out;
  out.patch = patch;
  out.rt_space = build_patch_space(mesh, patch, SpaceKind::RaviartThomas, p_hat, registry,
                                   cfg.max_degree);
  const FeSpace& W = out.rt_space.space;
  const TetMesh& pm = out.rt_space.patch->mesh;

  ConstrainedLsProblem prob;
  prob.consistency_tol = cfg.consistency_tol;
  prob.M = assemble_mass(W, cfg.quad.volume(p_hat));
  prob.t = Eigen::VectorXd::Zero(W.n_free);

  const int mono_dim = Poly::space_dim(p_hat);
  const int n_div_rows = mono_dim * pm.n_tets();
  const int n_mom_rows = 3 * pm.n_tets();
  std::vector<Eigen::Triplet<double>> ctrips;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n_div_rows + n_mom_rows);

  QuadratureRule vol = gauss_rule_tet(cfg.quad.volume(p_hat));
  QuadratureRule data = gauss_rule_tet(cfg.quad.data(p_hat));

  for (int tl = 0; tl < pm.n_tets(); ++tl) {
    int tp = out.rt_space.patch->parent_tet[tl];
    const auto& dofs = W.element_dofs[tl];
    int n = W.ndof_element(tl);

    MappedRule mr = map_to_tet(vol, pm.tet_vertices(tl));
    auto vals = W.shapes[tl]->values(mr.points);
    auto divs = W.shapes[tl]->differential(mr.points);

    // Objective moments (tau, phi)_K with tau = grad psi_a x curl A_h.
    Eigen::Matrix3Xd tau = theta_target(mesh, a, tp, sol, mr.points);
    Eigen::VectorXd t_local = Eigen::VectorXd::Zero(n);
    for (int c = 0; c < 3; ++c)
      t_local += vals[c] * (mr.weights.asDiagonal() * tau.row(c).transpose());
    W.scatter_add(tl, t_local, prob.t);

    // Divergence rows: (div v, m)_K = (-grad psi_a . j, m)_K.
    Eigen::MatrixXd mono = scaled_monomials(mesh, tp, p_hat, mr.points);
    Eigen::MatrixXd div_rows = mono * mr.weights.asDiagonal() * divs[0].transpose();
    for (int m = 0; m < mono_dim; ++m)
      for (int k = 0; k < n; ++k)
        if (dofs[k] >= 0 && div_rows(m, k) != 0.0)
          ctrips.emplace_back(tl * mono_dim + m, dofs[k], div_rows(m, k));

    MappedRule mrd = map_to_tet(data, pm.tet_vertices(tl));
    Eigen::MatrixXd mono_d = scaled_monomials(mesh, tp, p_hat, mrd.points);
    Vec3 grad_a = hat_eval(mesh, a, tp, mrd.points.col(0)).second;
    Eigen::VectorXd g(mrd.weights.size());
    for (int q = 0; q < g.size(); ++q) g(q) = -grad_a.dot(j.eval(mrd.points.col(q)));
    d.segment(tl * mono_dim, mono_dim) = mono_d * (mrd.weights.asDiagonal() * g);

    // Elementwise constant moments: (v, e_c)_K = (tau, e_c)_K.
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd row = vals[c] * mr.weights;
      for (int k = 0; k < n; ++k)
        if (dofs[k] >= 0 && row(k) != 0.0)
          ctrips.emplace_back(n_div_rows + tl * 3 + c, dofs[k], row(k));
      d(n_div_rows + tl * 3 + c) = tau.row(c) * mr.weights;
    }
  }

  prob.C = triplets_to_sparse(n_div_rows + n_mom_rows, W.n_free, ctrips);
  prob.d = d;

  ConstrainedLsSolution ls;
  try {
    ls = solve_constrained_ls(prob);
  } catch (const InfeasibleConstraints& e) {
    throw std::runtime_error("patch orthogonality violated at vertex " + std::to_string(a) +
                             ": " + e.what());
  }
  out.theta = ls.v;
  maybe_record(rec, cfg, "patch_" + std::to_string(a) + "_theta", prob, ls);
  return out;
}

CoefficientField accumulate_delta(const TetMesh& mesh, ShapeRegistry& registry,
                                  const std::vector<ThetaPatch>& thetas, FeSpace& delta_space,
                                  const EquilibrationConfig& cfg) {
  if (thetas.empty()) throw std::invalid_argument("accumulate_delta: no patches");
  const int p_hat = thetas.front().rt_space.space.degree;
  delta_space = build_space_bc(mesh, SpaceKind::RaviartThomas, p_hat, registry,
                               BoundaryTag::Neumann, cfg.max_degree);
  CoefficientField delta(delta_space);
  for (const auto& th : thetas)
    accumulate_patch_field(th.rt_space, th.theta, delta_space, delta.coeffs);

  // Post-checks: div delta_h = 0 and elementwise orthogonality to
  // constant vectors. Failures abort: they signal a broken Step 1.
  double scale = std::max(1.0, delta.coeffs.size() ? delta.coeffs.cwiseAbs().maxCoeff() : 0.0);
  QuadratureRule vol = gauss_rule_tet(cfg.quad.volume(p_hat));
  double max_div = 0.0, max_mom = 0.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    MappedRule mr = map_to_tet(vol, mesh.tet_vertices(t));
    Eigen::MatrixXd div = delta.differential(t, mr.points);
    max_div = std::max(max_div, div.cwiseAbs().maxCoeff());
    Eigen::Matrix3Xd vals = delta.values(t, mr.points);
    Vec3 mom = vals * mr.weights;
    max_mom = std::max(max_mom, mom.cwiseAbs().maxCoeff() / mesh.volume[t]);
  }
  if (max_div > 1e-8 * scale || max_mom > 1e-8 * scale)
    throw std::runtime_error("accumulate_delta: post-check failed (div " +
                             std::to_string(max_div) + ", moments " + std::to_string(max_mom) +
                             ")");
  return delta;
}

Eigen::VectorXd solve_delta_element(const TetMesh& mesh, ShapeRegistry& registry, int tet,
                                    int vertex, const CoefficientField& delta, int p,
                                    const EquilibrationConfig& cfg, const ProblemRecorder& rec) {
  const int q_check = p + 1; // RT degree of the local problem (=1 when p=0)
  const ElementShapeSet& rt = registry.get(SpaceKind::RaviartThomas, q_check, tet);

  // Target: psi_a delta_h for p >= 1 (already in RT_{p+1}(K)); its
  // canonical RT_1 interpolate when p = 0.
  auto target_field = [&](const Vec3& x) -> Vec3 {
    Eigen::Matrix3Xd pt(3, 1);
    pt.col(0) = x;
    double psi = hat_eval(mesh, vertex, tet, x).first;
    return psi * Vec3(delta.values(tet, pt).col(0));
  };
  Eigen::VectorXd w = rt.apply_dofs(target_field, 2 * (q_check + 1) + 2);

  // Neumann compatibility: the total flux of the prescribed trace must
  // vanish; the first face moment of each face is the mean normal trace.
  double flux_sum = 0.0;
  double flux_mag = 0.0;
  const auto& keys = rt.dof_keys();
  for (size_t k = 0; k < keys.size(); ++k) {
    if (keys[k].dim == 2 && keys[k].moment == 0) {
      double area = mesh.face_area(mesh.tet_faces[tet][keys[k].slot]);
      flux_sum += w(k) * area;
      flux_mag += std::abs(w(k)) * area;
    }
  }
  if (std::abs(flux_sum) > 1e-10 * std::max(1.0, flux_mag))
    throw std::runtime_error("solve_delta_element: Neumann compatibility violated on tet " +
                             std::to_string(tet) + ", vertex " + std::to_string(vertex));

  ConstrainedLsProblem prob;
  prob.consistency_tol = cfg.consistency_tol;
  QuadratureRule vol = gauss_rule_tet(2 * q_check + 4);
  MappedRule mr = map_to_tet(vol, mesh.tet_vertices(tet));
  auto vals = rt.values(mr.points);
  auto divs = rt.differential(mr.points);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(rt.ndof(), rt.ndof());
  for (auto& v : vals) M += v * mr.weights.asDiagonal() * v.transpose();
  std::vector<Eigen::Triplet<double>> mtrips;
  for (int i = 0; i < rt.ndof(); ++i)
    for (int k = 0; k < rt.ndof(); ++k)
      if (M(i, k) != 0.0) mtrips.emplace_back(i, k, M(i, k));
  prob.M = triplets_to_sparse(rt.ndof(), rt.ndof(), mtrips);
  prob.t = M * w;

  // Constraints: prescribed face DOFs (the normal trace) and zero
  // divergence against P_{q_check}(K).
  const int mono_dim = Poly::space_dim(q_check);
  std::vector<Eigen::Triplet<double>> ctrips;
  std::vector<double> rhs;
  int row = 0;
  for (size_t k = 0; k < keys.size(); ++k) {
    if (keys[k].dim == 2) {
      ctrips.emplace_back(row, static_cast<int>(k), 1.0);
      rhs.push_back(w(k));
      ++row;
    }
  }
  Eigen::MatrixXd mono = scaled_monomials(mesh, tet, q_check, mr.points);
  Eigen::MatrixXd div_rows = mono * mr.weights.asDiagonal() * divs[0].transpose();
  for (int m = 0; m < mono_dim; ++m, ++row) {
    for (int k = 0; k < rt.ndof(); ++k)
      if (div_rows(m, k) != 0.0) ctrips.emplace_back(row, k, div_rows(m, k));
    rhs.push_back(0.0);
  }
  prob.C = triplets_to_sparse(row, rt.ndof(), ctrips);
  prob.d = Eigen::Map<Eigen::VectorXd>(rhs.data(), rhs.size());

  ConstrainedLsSolution ls = solve_constrained_ls(prob);
  maybe_record(rec, cfg,
               "patch_" + std::to_string(vertex) + "_delta_elem" + std::to_string(tet), prob,
               ls);
  return ls.v;
}

VertexFlux solve_equilibration_patch(const TetMesh& mesh, ShapeRegistry& registry,
                                     const ThetaPatch& theta,
                                     const MagneticPotentialSolution& sol,
                                     const CurrentDensity& j, const CoefficientField& delta,
                                     const EquilibrationConfig& cfg,
                                     const ProblemRecorder& rec) {
  const int p = sol.degree;
  const int a = theta.patch.center;
  const TetMesh& pm = theta.rt_space.patch->mesh;
  const std::vector<int>& parent = theta.rt_space.patch->parent_tet;

  VertexFlux out;

  // Step 2: the elementwise corrections on this patch.
  out.delta_elem.resize(pm.n_tets());
  for (int tl = 0; tl < pm.n_tets(); ++tl)
    out.delta_elem[tl] =
        solve_delta_element(mesh, registry, parent[tl], a, delta, p, cfg, rec);

  // Patch spaces of the flux minimization.
  out.nd_space = build_patch_space(mesh, theta.patch, SpaceKind::Nedelec, p + 1, registry,
                                   cfg.max_degree >= 0 ? cfg.max_degree : p + 1);
  PatchSpace rt_hi = build_patch_space(mesh, theta.patch, SpaceKind::RaviartThomas, p + 1,
                                       registry, cfg.max_degree >= 0 ? cfg.max_degree : p + 1);
  const FeSpace& V = out.nd_space.space;
  const FeSpace& W = rt_hi.space;

  CoefficientField theta_field(theta.rt_space.space);
  theta_field.coeffs = theta.theta;

  // Moments of the patch current j^a = psi_a j + theta^a - delta^a against
  // the RT_{p+1} basis, its L2 norm, and the flux objective moments.
  QuadratureRule data = gauss_rule_tet(cfg.quad.data(p + 1));
  Eigen::VectorXd current_moments = Eigen::VectorXd::Zero(W.n_free);
  double current_sq = 0.0;
  Eigen::VectorXd t_nd = Eigen::VectorXd::Zero(V.n_free);
  for (int tl = 0; tl < pm.n_tets(); ++tl) {
    int tp = parent[tl];
    MappedRule mr = map_to_tet(data, pm.tet_vertices(tl));
    const ElementShapeSet& rt_elem = registry.get(SpaceKind::RaviartThomas, p + 1, tp);
    auto wvals = W.shapes[tl]->values(mr.points);
    auto dvals = rt_elem.values(mr.points);
    Eigen::Matrix3Xd theta_vals = theta_field.values(tl, mr.points);
    Eigen::Matrix3Xd curl_vals = sol.curl_at(tp, mr.points);

    Eigen::Matrix3Xd current(3, mr.points.cols());
    Eigen::Matrix3Xd target(3, mr.points.cols());
    for (int qp = 0; qp < mr.points.cols(); ++qp) {
      double psi = hat_eval(mesh, a, tp, mr.points.col(qp)).first;
      Vec3 delta_a(out.delta_elem[tl].dot(dvals[0].col(qp)),
                   out.delta_elem[tl].dot(dvals[1].col(qp)),
                   out.delta_elem[tl].dot(dvals[2].col(qp)));
      current.col(qp) = psi * j.eval(mr.points.col(qp)) + Vec3(theta_vals.col(qp)) - delta_a;
      target.col(qp) = psi * Vec3(curl_vals.col(qp));
      current_sq += mr.weights(qp) * current.col(qp).squaredNorm();
    }
    Eigen::VectorXd w_local = Eigen::VectorXd::Zero(W.ndof_element(tl));
    Eigen::VectorXd v_local = Eigen::VectorXd::Zero(V.ndof_element(tl));
    auto vvals = V.shapes[tl]->values(mr.points);
    for (int c = 0; c < 3; ++c) {
      w_local += wvals[c] * (mr.weights.asDiagonal() * current.row(c).transpose());
      v_local += vvals[c] * (mr.weights.asDiagonal() * target.row(c).transpose());
    }
    W.scatter_add(tl, w_local, current_moments);
    V.scatter_add(tl, v_local, t_nd);
  }

  Eigen::SparseMatrix<double> rt_mass = assemble_mass(W, cfg.quad.volume(p + 1));

  // Divergence-free projection of the patch current. For piecewise RT_p
  // data the current is divergence-free by construction and the
  // projection is the identity (verified in verify mode).
  Eigen::VectorXd d_target = current_moments;
  bool project = !j.is_piecewise_rt || cfg.verify;
  if (project) {
    ConstrainedLsProblem proj;
    proj.consistency_tol = cfg.consistency_tol;
    proj.M = rt_mass;
    proj.t = current_moments;
    const int mono_dim = Poly::space_dim(p + 1);
    std::vector<Eigen::Triplet<double>> ctrips;
    QuadratureRule vol = gauss_rule_tet(cfg.quad.volume(p + 1));
    for (int tl = 0; tl < pm.n_tets(); ++tl) {
      MappedRule mr = map_to_tet(vol, pm.tet_vertices(tl));
      auto divs = W.shapes[tl]->differential(mr.points);
      Eigen::MatrixXd mono = scaled_monomials(mesh, parent[tl], p + 1, mr.points);
      Eigen::MatrixXd rows = mono * mr.weights.asDiagonal() * divs[0].transpose();
      const auto& dofs = W.element_dofs[tl];
      for (int m = 0; m < mono_dim; ++m)
        for (size_t k = 0; k < dofs.size(); ++k)
          if (dofs[k] >= 0 && rows(m, k) != 0.0)
            ctrips.emplace_back(tl * mono_dim + m, dofs[k], rows(m, k));
    }
    proj.C = triplets_to_sparse(mono_dim * pm.n_tets(), W.n_free, ctrips);
    proj.d = Eigen::VectorXd::Zero(proj.C.rows());
    ConstrainedLsSolution ps = solve_constrained_ls(proj);
    maybe_record(rec, cfg, "patch_" + std::to_string(a) + "_divfree", proj, ps);
    double dist_sq = ps.objective + current_sq; // ||jhat - j^a||^2
    out.eta_osc_jh = theta.patch.h_patch * std::sqrt(std::max(0.0, dist_sq));
    if (j.is_piecewise_rt) {
      double scale = std::sqrt(current_sq) + 1e-300;
      if (out.eta_osc_jh > 1e-8 * theta.patch.h_patch * scale)
        throw std::runtime_error(
            "equilibration: polynomial current not divergence-free at vertex " +
            std::to_string(a));
      out.eta_osc_jh = 0.0;
    } else {
      d_target = rt_mass * ps.v;
    }
  }

  // The flux minimization with the curl constraint imposed against the
  // RT_{p+1} patch space (redundant rows resolved by the solver).
  ConstrainedLsProblem prob;
  prob.consistency_tol = cfg.consistency_tol;
  prob.M = assemble_mass(V, cfg.quad.volume(p + 1));
  prob.t = t_nd;
  std::vector<Eigen::Triplet<double>> ctrips;
  QuadratureRule vol = gauss_rule_tet(cfg.quad.volume(p + 1));
  for (int tl = 0; tl < pm.n_tets(); ++tl) {
    MappedRule mr = map_to_tet(vol, pm.tet_vertices(tl));
    auto curls = V.shapes[tl]->differential(mr.points);
    auto wvals = W.shapes[tl]->values(mr.points);
    Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(W.ndof_element(tl), V.ndof_element(tl));
    for (int c = 0; c < 3; ++c)
      rows += wvals[c] * mr.weights.asDiagonal() * curls[c].transpose();
    const auto& wd = W.element_dofs[tl];
    const auto& vd = V.element_dofs[tl];
    for (size_t wi = 0; wi < wd.size(); ++wi)
      if (wd[wi] >= 0)
        for (size_t vi = 0; vi < vd.size(); ++vi)
          if (vd[vi] >= 0 && rows(wi, vi) != 0.0)
            ctrips.emplace_back(wd[wi], vd[vi], rows(wi, vi));
  }
  prob.C = triplets_to_sparse(W.n_free, V.n_free, ctrips);
  prob.d = d_target;

  ConstrainedLsSolution ls;
  try {
    ls = solve_constrained_ls(prob);
  } catch (const InfeasibleConstraints& e) {
    throw std::runtime_error("equilibration patch " + std::to_string(a) +
                             " infeasible (broken decomposition upstream): " + e.what());
  }
  out.flux = ls.v;
  maybe_record(rec, cfg, "patch_" + std::to_string(a) + "_flux", prob, ls);
  return out;
}

EquilibratedFlux assemble_flux(const TetMesh& mesh, ShapeRegistry& registry,
                               const std::vector<ThetaPatch>& thetas,
                               const std::vector<VertexFlux>& fluxes, const CurrentDensity& j,
                               const EquilibrationConfig& cfg) {
  if (thetas.empty() || fluxes.empty()) throw std::invalid_argument("assemble_flux: no patches");
  const int p = fluxes.front().nd_space.space.degree - 1;

  EquilibratedFlux out;
  out.space = build_space_bc(mesh, SpaceKind::Nedelec, p + 1, registry, BoundaryTag::Neumann,
                             cfg.max_degree >= 0 ? cfg.max_degree : p + 1);
  out.coeffs = Eigen::VectorXd::Zero(out.space.n_free);
  for (size_t a = 0; a < fluxes.size(); ++a)
    accumulate_patch_field(fluxes[a].nd_space, fluxes[a].flux, out.space, out.coeffs);

  CoefficientField sigma(out.space);
  sigma.coeffs = out.coeffs;

  // Equilibration residual ||j - curl sigma_h|| / ||j||.
  QuadratureRule data = gauss_rule_tet(cfg.quad.data(p + 1));
  double num = 0.0, den = 0.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    MappedRule mr = map_to_tet(data, mesh.tet_vertices(t));
    Eigen::MatrixXd curl = sigma.differential(t, mr.points);
    for (int qp = 0; qp < mr.weights.size(); ++qp) {
      Vec3 jv = j.eval(mr.points.col(qp));
      num += mr.weights(qp) * (jv - Vec3(curl.col(qp))).squaredNorm();
      den += mr.weights(qp) * jv.squaredNorm();
    }
  }
  out.equil_residual_rel = std::sqrt(num) / std::max(1e-300, std::sqrt(den));

  // Tangential jumps across interior faces, scaled by the flux magnitude.
  QuadratureRule tri = gauss_rule_triangle(2 * (p + 2));
  double worst = 0.0, mag = 0.0;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& face = mesh.faces[f];
    if (face.on_boundary()) continue;
    Eigen::Matrix3d corners;
    for (int i = 0; i < 3; ++i) corners.col(i) = mesh.vertices[face.v[i]];
    MappedRule mr = map_to_triangle(tri, corners);
    Vec3 n =
        (corners.col(1) - corners.col(0)).cross(corners.col(2) - corners.col(0)).normalized();
    Eigen::Matrix3Xd va = sigma.values(face.owner, mr.points);
    Eigen::Matrix3Xd vb = sigma.values(face.neighbor, mr.points);
    for (int qp = 0; qp < mr.points.cols(); ++qp) {
      worst = std::max(worst, Vec3(va.col(qp) - vb.col(qp)).cross(n).norm());
      mag = std::max(mag, std::max(va.col(qp).norm(), vb.col(qp).norm()));
    }
  }
  out.max_tangential_jump = worst / std::max(1.0, mag);
  return out;
}

double oscillation_term(const TetMesh& mesh, const std::vector<int>& tets,
                        const std::vector<double>& element_norms) {
  double sq = 0.0;
  for (int t : tets) {
    double term = mesh.h_tet[t] / M_PI * element_norms[t];
    sq += term * term;
  }
  return std::sqrt(sq);
}

std::vector<double> element_oscillation_norms(const TetMesh& mesh, ShapeRegistry& registry,
                                              const CurrentDensity& j, int p_hat,
                                              const QuadConfig& quad) {
  std::vector<double> norms(mesh.n_tets(), 0.0);
  if (j.is_piecewise_rt && j.rt_degree <= p_hat) return norms; // reproduced exactly
  int data = quad.data(p_hat);
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const ElementShapeSet& pset = registry.get(SpaceKind::Lagrange, p_hat, t);
    auto proj = l2_project_vector(pset, j.eval, data);
    MappedRule mr = map_to_tet(gauss_rule_tet(data), mesh.tet_vertices(t));
    auto vals = pset.values(mr.points);
    double sq = 0.0;
    for (int qp = 0; qp < mr.weights.size(); ++qp) {
      Vec3 approx(proj[0].coeffs.dot(vals[0].col(qp)), proj[1].coeffs.dot(vals[0].col(qp)),
                  proj[2].coeffs.dot(vals[0].col(qp)));
      sq += mr.weights(qp) * (j.eval(mr.points.col(qp)) - approx).squaredNorm();
    }
    norms[t] = std::sqrt(sq);
  }
  return norms;
}

std::unique_ptr<FluxReconstruction> equilibrate_flux(const TetMesh& mesh,
                                                     ShapeRegistry& registry,
                                                     const MagneticPotentialSolution& sol,
                                                     const CurrentDensity& j,
                                                     const EquilibrationConfig& cfg,
                                                     const ProblemRecorder& rec) {
  auto recon = std::make_unique<FluxReconstruction>();
  recon->degree = sol.degree;
  recon->p_hat = p_hat_for(sol.degree);

  const int nv = mesh.n_vertices();
  std::vector<double> osc_norms =
      element_oscillation_norms(mesh, registry, j, recon->p_hat, cfg.quad);

  // Pre-build the element shape sets touched by the patch solves so the
  // parallel sweeps only read the registry.
  for (int t = 0; t < mesh.n_tets(); ++t) {
    registry.get(SpaceKind::RaviartThomas, recon->p_hat, t);
    registry.get(SpaceKind::RaviartThomas, sol.degree + 1, t);
    registry.get(SpaceKind::Nedelec, sol.degree + 1, t);
  }

  // Step 1: one over-constrained RT minimization per vertex.
  recon->thetas.resize(nv);
  parallel_over(nv, cfg.n_threads, [&](int a) {
    VertexPatch patch = vertex_patch(mesh, a);
    recon->thetas[a] = solve_theta_patch(mesh, registry, patch, sol, j, cfg, rec);
    recon->thetas[a].eta_osc_j = oscillation_term(mesh, patch.tets, osc_norms);
    recon->thetas[a].eta_osc_j_ext = oscillation_term(mesh, patch.extended_tets, osc_norms);
  });

  // Step 2 accumulation (fixed vertex order keeps runs reproducible).
  recon->delta = accumulate_delta(mesh, registry, recon->thetas, recon->delta_space, cfg);
  recon->delta.space = &recon->delta_space;

  // Steps 2 (elementwise) and 3, plus the patch flux minimizations.
  recon->vertex_flux.resize(nv);
  parallel_over(nv, cfg.n_threads, [&](int a) {
    recon->vertex_flux[a] = solve_equilibration_patch(mesh, registry, recon->thetas[a], sol, j,
                                                      recon->delta, cfg, rec);
  });
  recon->eta_osc_jh.resize(nv);
  for (int a = 0; a < nv; ++a) recon->eta_osc_jh[a] = recon->vertex_flux[a].eta_osc_jh;

  recon->flux = assemble_flux(mesh, registry, recon->thetas, recon->vertex_flux, j, cfg);

  if (cfg.verify && j.is_piecewise_rt) {
    DecompositionCheck check = check_decomposition(mesh, registry, *recon, j, cfg.quad);
    double tol = cfg.post_check_tol;
    if (check.max_current_sum > tol || check.max_current_divergence > tol ||
        check.max_boundary_trace > tol || check.max_delta_split > tol)
      throw std::runtime_error("equilibrate_flux: decomposition post-checks failed");
  }
  return recon;
}

DecompositionCheck check_decomposition(const TetMesh& mesh, ShapeRegistry& registry,
                                       const FluxReconstruction& recon,
                                       const CurrentDensity& j, const QuadConfig& quad) {
  DecompositionCheck out;
  const int p1 = recon.degree + 1;
  QuadratureRule vol = gauss_rule_tet(quad.volume(p1));
  QuadratureRule tri = gauss_rule_triangle(2 * p1 + 2);

  // Patch-local element index per (vertex, parent tet).
  std::vector<std::map<int, int>> local_of(mesh.n_vertices());
  for (int a = 0; a < mesh.n_vertices(); ++a) {
    const auto& parent = recon.thetas[a].rt_space.patch->parent_tet;
    for (size_t tl = 0; tl < parent.size(); ++tl) local_of[a][parent[tl]] = static_cast<int>(tl);
  }

  // j^a = psi_a j + theta^a - delta^a and its divergence at points of the
  // parent element t.
  auto current_at = [&](int a, int t, const Eigen::Matrix3Xd& pts, Eigen::Matrix3Xd& value,
                        Eigen::VectorXd& divergence) {
    int tl = local_of[a].at(t);
    const FeSpace& rt_lo = recon.thetas[a].rt_space.space;
    CoefficientField th(rt_lo);
    th.coeffs = recon.thetas[a].theta;
    Eigen::Matrix3Xd theta_vals = th.values(tl, pts);
    Eigen::MatrixXd theta_div = th.differential(tl, pts);

    const ElementShapeSet& rt_hi = registry.get(SpaceKind::RaviartThomas, p1, t);
    const Eigen::VectorXd& dc = recon.vertex_flux[a].delta_elem[tl];
    auto dvals = rt_hi.values(pts);
    auto ddivs = rt_hi.differential(pts);

    value.resize(3, pts.cols());
    divergence.resize(pts.cols());
    Vec3 grad_a = hat_eval(mesh, a, t, pts.col(0)).second;
    for (int qp = 0; qp < pts.cols(); ++qp) {
      double psi = hat_eval(mesh, a, t, pts.col(qp)).first;
      Vec3 jv = j.eval(pts.col(qp));
      Vec3 delta_a(dc.dot(dvals[0].col(qp)), dc.dot(dvals[1].col(qp)), dc.dot(dvals[2].col(qp)));
      value.col(qp) = psi * jv + Vec3(theta_vals.col(qp)) - delta_a;
      // div(psi_a j) = grad psi_a . j for divergence-free data.
      divergence(qp) = grad_a.dot(jv) + theta_div(0, qp) - dc.dot(ddivs[0].col(qp));
    }
  };

  double jscale = 1.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    MappedRule mr = map_to_tet(vol, mesh.tet_vertices(t));
    Eigen::Matrix3Xd sum = Eigen::Matrix3Xd::Zero(3, mr.points.cols());
    Eigen::Matrix3Xd delta_sum = Eigen::Matrix3Xd::Zero(3, mr.points.cols());
    const ElementShapeSet& rt_hi = registry.get(SpaceKind::RaviartThomas, p1, t);
    auto dvals = rt_hi.values(mr.points);
    for (int i = 0; i < 4; ++i) {
      int a = mesh.tets[t][i];
      Eigen::Matrix3Xd value;
      Eigen::VectorXd divergence;
      current_at(a, t, mr.points, value, divergence);
      sum += value;
      out.max_current_divergence =
          std::max(out.max_current_divergence, divergence.cwiseAbs().maxCoeff());
      const Eigen::VectorXd& dc = recon.vertex_flux[a].delta_elem[local_of[a].at(t)];
      for (int c = 0; c < 3; ++c) delta_sum.row(c) += dc.transpose() * dvals[c];
    }
    Eigen::Matrix3Xd dh = recon.delta.values(t, mr.points);
    out.max_delta_split =
        std::max(out.max_delta_split, (delta_sum - dh).cwiseAbs().maxCoeff());
    for (int qp = 0; qp < mr.points.cols(); ++qp) {
      Vec3 jv = j.eval(mr.points.col(qp));
      jscale = std::max(jscale, jv.norm());
      out.max_current_sum = std::max(out.max_current_sum, (Vec3(sum.col(qp)) - jv).norm());
    }
  }
  out.max_current_sum /= jscale;
  out.max_current_divergence /= jscale;

  // Zero normal trace of j^a on the constrained part of each patch boundary.
  for (int a = 0; a < mesh.n_vertices(); ++a) {
    const VertexPatch& patch = recon.thetas[a].patch;
    std::set<int> gamma_d(patch.gamma_d_faces.begin(), patch.gamma_d_faces.end());
    std::set<int> in_patch(patch.tets.begin(), patch.tets.end());
    for (int f : patch.boundary_faces) {
      if (gamma_d.count(f)) continue;
      const Face& face = mesh.faces[f];
      int t = in_patch.count(face.owner) ? face.owner : face.neighbor;
      Eigen::Matrix3d corners;
      for (int i = 0; i < 3; ++i) corners.col(i) = mesh.vertices[face.v[i]];
      MappedRule mr = map_to_triangle(tri, corners);
      Vec3 n =
          (corners.col(1) - corners.col(0)).cross(corners.col(2) - corners.col(0)).normalized();
      Eigen::Matrix3Xd value;
      Eigen::VectorXd divergence;
      current_at(a, t, mr.points, value, divergence);
      for (int qp = 0; qp < mr.points.cols(); ++qp)
        out.max_boundary_trace =
            std::max(out.max_boundary_trace, std::abs(value.col(qp).dot(n)) / jscale);
    }
  }
  return out;
}

} // namespace curleq
