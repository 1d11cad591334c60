// SPDX-License-Identifier: Apache-2.0
#include "curleq/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace curleq {

std::pair<std::vector<double>, double> eta_elements(const TetMesh& mesh,
                                                    const EquilibratedFlux& flux,
                                                    const MagneticPotentialSolution& sol) {
  const int p1 = flux.space.degree;
  QuadratureRule rule = gauss_rule_tet(2 * p1 + 2);
  CoefficientField sigma(flux.space);
  sigma.coeffs = flux.coeffs;
  std::vector<double> eta(mesh.n_tets(), 0.0);
  double total = 0.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    MappedRule mr = map_to_tet(rule, mesh.tet_vertices(t));
    Eigen::Matrix3Xd s = sigma.values(t, mr.points);
    Eigen::Matrix3Xd c = sol.curl_at(t, mr.points);
    double sq = 0.0;
    for (int qp = 0; qp < mr.weights.size(); ++qp)
      sq += mr.weights(qp) * (s.col(qp) - c.col(qp)).squaredNorm();
    eta[t] = std::sqrt(sq);
    total += sq;
  }
  return {eta, std::sqrt(total)};
}

std::vector<double> exact_error_elements(const TetMesh& mesh,
                                         const MagneticPotentialSolution& sol,
                                         const std::function<Vec3(const Vec3&)>& exact_curl,
                                         const QuadConfig& quad) {
  QuadratureRule rule = gauss_rule_tet(quad.data(sol.degree));
  std::vector<double> err(mesh.n_tets(), 0.0);
  for (int t = 0; t < mesh.n_tets(); ++t) {
    MappedRule mr = map_to_tet(rule, mesh.tet_vertices(t));
    Eigen::Matrix3Xd c = sol.curl_at(t, mr.points);
    double sq = 0.0;
    for (int qp = 0; qp < mr.weights.size(); ++qp)
      sq += mr.weights(qp) * (exact_curl(mr.points.col(qp)) - Vec3(c.col(qp))).squaredNorm();
    err[t] = std::sqrt(sq);
  }
  return err;
}

double exact_error(const TetMesh& mesh, const MagneticPotentialSolution& sol,
                   const std::function<Vec3(const Vec3&)>& exact_curl, const QuadConfig& quad) {
  auto err = exact_error_elements(mesh, sol, exact_curl, quad);
  double sq = 0.0;
  for (double e : err) sq += e * e;
  return std::sqrt(sq);
}

double oscillation_total(const std::vector<double>& eta_osc_jh, const EstimatorConstants& c) {
  double sq = 0.0;
  for (double t : eta_osc_jh) sq += c.c_pf * c.c_pf * t * t;
  return 2.0 * c.c_lift * std::sqrt(sq);
}

std::vector<int> doerfler_mark(const std::vector<double>& eta_element, double theta) {
  if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("doerfler_mark: theta in [0,1]");
  std::vector<int> order(eta_element.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (eta_element[a] != eta_element[b]) return eta_element[a] > eta_element[b];
    return a < b;
  });
  double total = 0.0;
  for (double e : eta_element) total += e * e;
  double goal = theta * theta * total - 1e-12 * total;
  std::vector<int> marked;
  double acc = 0.0;
  for (int t : order) {
    if (acc >= goal) break;
    if (eta_element[t] <= 0.0) break;
    marked.push_back(t);
    acc += eta_element[t] * eta_element[t];
  }
  return marked;
}

EstimatorReport build_report(const TetMesh& mesh, const MagneticPotentialSolution& sol,
                             const FluxReconstruction& recon, const EstimatorConstants& consts,
                             const std::function<Vec3(const Vec3&)>* exact_curl,
                             const QuadConfig& quad) {
  EstimatorReport rep;
  auto [eta_k, eta] = eta_elements(mesh, recon.flux, sol);
  rep.eta_element = std::move(eta_k);
  rep.eta = eta;
  rep.eta_osc = oscillation_total(recon.eta_osc_jh, consts);
  rep.eta_total = rep.eta + rep.eta_osc;
  rep.c_lift_certified = consts.c_lift_certified;
  rep.equil_residual = recon.flux.equil_residual_rel;
  rep.max_tangential_jump = recon.flux.max_tangential_jump;
  if (exact_curl) {
    rep.exact_error = exact_error(mesh, sol, *exact_curl, quad);
    rep.effectivity = rep.eta / std::max(1e-300, rep.exact_error);
  }
  return rep;
}

} // namespace curleq
