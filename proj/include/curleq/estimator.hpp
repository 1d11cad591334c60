// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "curleq/equilibration.hpp"

#include <optional>

namespace curleq {

/// Constants of the oscillation aggregate. C_lift has no certified value
/// for general domains; reports carry an explicit flag for it.
struct EstimatorConstants {
  double c_lift = 1.0;
  bool c_lift_certified = false;
  double c_pf = 1.0 / M_PI;
};

/// Per-element indicators and global estimator data of one run.
struct EstimatorReport {
  std::vector<double> eta_element; // eta_K = ||sigma_h - curl A_h||_K
  double eta = 0.0;                // root sum of squares
  double eta_osc = 0.0;            // 2 C_lift {sum_a C_PF^2 (eta_osc_jh^a)^2}^(1/2)
  double eta_total = 0.0;          // eta + eta_osc
  bool c_lift_certified = false;
  double exact_error = -1.0;       // ||curl(A - A_h)||, when an exact field is known
  double effectivity = -1.0;       // eta / exact_error
  double equil_residual = 0.0;
  double max_tangential_jump = 0.0;
};

/// eta_K = ||sigma_h - curl A_h||_K at exactness 2(p+1)+2 and the global
/// root-sum-square.
std::pair<std::vector<double>, double> eta_elements(const TetMesh& mesh,
                                                    const EquilibratedFlux& flux,
                                                    const MagneticPotentialSolution& sol);

/// ||curl(A - A_h)|| against an exact curl, at the data exactness.
double exact_error(const TetMesh& mesh, const MagneticPotentialSolution& sol,
                   const std::function<Vec3(const Vec3&)>& exact_curl, const QuadConfig& quad);

/// Elementwise ||curl(A - A_h)||_K (for indicator-quality studies).
std::vector<double> exact_error_elements(const TetMesh& mesh,
                                         const MagneticPotentialSolution& sol,
                                         const std::function<Vec3(const Vec3&)>& exact_curl,
                                         const QuadConfig& quad);

/// The oscillation aggregate of the guaranteed bound.
double oscillation_total(const std::vector<double>& eta_osc_jh, const EstimatorConstants& c);

/// Smallest prefix of elements, sorted by decreasing indicator (ties by
/// element index), whose squared sum reaches theta^2 times the total.
std::vector<int> doerfler_mark(const std::vector<double>& eta_element, double theta);

/// Assembles the full report for one solved configuration.
EstimatorReport build_report(const TetMesh& mesh, const MagneticPotentialSolution& sol,
                             const FluxReconstruction& recon, const EstimatorConstants& consts,
                             const std::function<Vec3(const Vec3&)>* exact_curl,
                             const QuadConfig& quad);

} // namespace curleq
