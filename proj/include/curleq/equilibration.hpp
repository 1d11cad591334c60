// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "curleq/curl_solver.hpp"
#include "curleq/linalg.hpp"
#include "curleq/projectors.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace curleq {

/// Recorded constrained problem, for oracle cross-checks and debug dumps.
struct ProblemRecord {
  std::string tag;
  ConstrainedLsProblem problem;
  Eigen::VectorXd solution;
  double objective = 0.0;
};
using ProblemRecorder = std::function<void(ProblemRecord&&)>;

struct EquilibrationConfig {
  QuadConfig quad;
  bool verify = false;         // run every post-check (otherwise sampled)
  double post_check_tol = 1e-9;
  double consistency_tol = 1e-8;
  int n_threads = 0;           // 0: hardware concurrency
  std::string dump_dir;        // when set, problems are dumped there
  int max_degree = -1;         // space degree cap override (p+1 needed)
};

/// Step-1 patch data and minimizer: theta^a in RT_phat(T_a) cap H_*(div)
/// minimizing || v - grad psi_a x curl A_h || under the divergence,
/// normal-trace, and elementwise constant-moment constraints.
struct ThetaPatch {
  VertexPatch patch;
  PatchSpace rt_space; // RT_phat with the patch boundary conditions
  Eigen::VectorXd theta;
  double eta_osc_j = 0.0;     // patch data oscillation
  double eta_osc_j_ext = 0.0; // same on the extended patch
};

/// Per-vertex products of Steps 2-3 and the patch flux minimization.
struct VertexFlux {
  PatchSpace nd_space;                    // ND_{p+1} patch space
  Eigen::VectorXd flux;                   // h^a
  std::vector<Eigen::VectorXd> delta_elem; // delta^a per patch-local tet, RT_{p+1}(K)
  double eta_osc_jh = 0.0;                // h_patch * || Pi_V(j^a) - j^a ||
};

/// The assembled equilibrated flux sigma_h in ND_{p+1}(T_h) cap H_N(curl).
struct EquilibratedFlux {
  FeSpace space;
  Eigen::VectorXd coeffs;
  double equil_residual_rel = 0.0; // ||j - curl sigma_h|| / ||j||
  double max_tangential_jump = 0.0; // scaled by the flux magnitude
};

/// Everything the error estimator consumes. Returned on the heap: the
/// delta field points into delta_space.
struct FluxReconstruction {
  int degree = 0;  // p
  int p_hat = 1;
  std::vector<ThetaPatch> thetas;      // per vertex
  std::vector<VertexFlux> vertex_flux; // per vertex
  FeSpace delta_space;
  CoefficientField delta;              // delta_h in RT_phat(T_h) cap H_N(div)
  EquilibratedFlux flux;
  std::vector<double> eta_osc_jh;      // per vertex
};

/// Residuals of the decomposition identities: pointwise sum of the patch
/// currents against j, their divergences and patch-boundary traces, and
/// the elementwise delta decomposition.
struct DecompositionCheck {
  double max_current_sum = 0.0;        // |sum_a j^a - j| at volume points
  double max_current_divergence = 0.0; // |div j^a|
  double max_boundary_trace = 0.0;     // |j^a . n| on the constrained patch boundary
  double max_delta_split = 0.0;        // |sum_{a in K} delta^a - delta_h|
};

/// Step 1 for one vertex.
ThetaPatch solve_theta_patch(const TetMesh& mesh, ShapeRegistry& registry,
                             const VertexPatch& patch, const MagneticPotentialSolution& sol,
                             const CurrentDensity& j, const EquilibrationConfig& cfg,
                             const ProblemRecorder& rec = nullptr);

/// Step 2 accumulation: delta_h = sum of theta^a, with the divergence and
/// elementwise-moment post-checks (failures abort).
CoefficientField accumulate_delta(const TetMesh& mesh, ShapeRegistry& registry,
                                  const std::vector<ThetaPatch>& thetas, FeSpace& delta_space,
                                  const EquilibrationConfig& cfg);

/// Step 2 elementwise minimization for vertex a of element K (patch-local
/// index t_local in theta.patch): divergence-free RT_{p+1}(K) field with
/// the normal trace of (the RT-interpolated) psi_a delta_h.
Eigen::VectorXd solve_delta_element(const TetMesh& mesh, ShapeRegistry& registry, int tet,
                                    int vertex, const CoefficientField& delta, int p,
                                    const EquilibrationConfig& cfg,
                                    const ProblemRecorder& rec = nullptr);

/// Step 3 + Definition of the flux: minimizes ||v - psi_a curl A_h|| over
/// ND_{p+1}(T_a) cap H_*(curl) under the weak curl constraint realizing
/// curl v = Pi_V(j^a); for non-polynomial data the divergence-free
/// projection of j^a is computed first and eta_osc_jh is its distance.
VertexFlux solve_equilibration_patch(const TetMesh& mesh, ShapeRegistry& registry,
                                     const ThetaPatch& theta,
                                     const MagneticPotentialSolution& sol,
                                     const CurrentDensity& j, const CoefficientField& delta,
                                     const EquilibrationConfig& cfg,
                                     const ProblemRecorder& rec = nullptr);

/// Sum of the extended-by-zero patch fluxes.
EquilibratedFlux assemble_flux(const TetMesh& mesh, ShapeRegistry& registry,
                               const std::vector<ThetaPatch>& thetas,
                               const std::vector<VertexFlux>& fluxes,
                               const CurrentDensity& j, const EquilibrationConfig& cfg);

/// Patch data oscillation {sum_K (h_K/pi ||j - Pi_phat j||_K)^2}^(1/2);
/// `element_norms[K]` must hold ||j - Pi_phat j||_K.
double oscillation_term(const TetMesh& mesh, const std::vector<int>& tets,
                        const std::vector<double>& element_norms);

/// Elementwise ||j - Pi_phat j||_K for all elements (zero for piecewise
/// RT data of degree <= phat).
std::vector<double> element_oscillation_norms(const TetMesh& mesh, ShapeRegistry& registry,
                                              const CurrentDensity& j, int p_hat,
                                              const QuadConfig& quad);

/// The whole reconstruction pipeline for a solved potential.
std::unique_ptr<FluxReconstruction> equilibrate_flux(const TetMesh& mesh,
                                                     ShapeRegistry& registry,
                                                     const MagneticPotentialSolution& sol,
                                                     const CurrentDensity& j,
                                                     const EquilibrationConfig& cfg,
                                                     const ProblemRecorder& rec = nullptr);

/// Decomposition identities of the reconstruction, evaluated pointwise
/// (piecewise polynomial data only for the divergence/sum checks).
DecompositionCheck check_decomposition(const TetMesh& mesh, ShapeRegistry& registry,
                                       const FluxReconstruction& recon,
                                       const CurrentDensity& j, const QuadConfig& quad);

int p_hat_for(int p);

} // namespace curleq
