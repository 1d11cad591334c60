// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "curleq/fe_space.hpp"
#include "curleq/linalg.hpp"

#include <functional>
#include <optional>

namespace curleq {

/// Quadrature policy: element integrals of polynomial integrands at
/// 2q+4, data terms (current density, exact solutions) at
/// max(2q+8, 14) unless overridden.
struct QuadConfig {
  int volume_override = -1;
  int data_override = -1;

  int volume(int q) const { return volume_override > 0 ? volume_override : 2 * q + 4; }
  int data(int q) const { return data_override > 0 ? data_override : std::max(2 * q + 8, 14); }
};

/// The current density j. It is expected to be divergence-free and
/// H_N(div)-conforming; when it is a piecewise RT_p polynomial the
/// reconstruction below is exactly equilibrated.
struct CurrentDensity {
  std::function<Vec3(const Vec3&)> eval;
  bool is_piecewise_rt = false;
  int rt_degree = 0;
  std::function<double(const Vec3&)> divergence; // optional, diagnostics only
};

/// Discrete solution of the curl-curl problem: the potential A_h in
/// ND_p cap H_D(curl) and the gauge multiplier in P_{p+1} cap H^1_D
/// (zero up to quadrature and round-off for compatible data).
struct MagneticPotentialSolution {
  int degree = 0;
  FeSpace space;       // ND_p, Dirichlet part constrained
  FeSpace gauge_space; // P_{p+1}, Dirichlet part constrained
  Eigen::VectorXd potential;
  Eigen::VectorXd multiplier;
  double galerkin_residual = 0.0; // max |(curl A_h,curl v)+(grad s,v)-(j,v)| / ||rhs||
  double multiplier_norm = 0.0;   // ||grad s_h||
  double rhs_norm = 0.0;
  bool compatibility_warning = false;

  /// curl A_h on element t at physical points.
  Eigen::Matrix3Xd curl_at(int t, const Eigen::Matrix3Xd& pts) const;
  /// A_h values.
  Eigen::Matrix3Xd value_at(int t, const Eigen::Matrix3Xd& pts) const;
};

/// Assembles and solves the mixed system
///   (curl A_h, curl v) + (grad s_h, v) = (j, v)   for all v,
///   (A_h, grad r) = 0                             for all r,
/// with the gauge multiplier in gradients of P_{p+1}. Requires a simply
/// connected domain with connected Dirichlet boundary (by contract).
MagneticPotentialSolution solve_magnetic_potential(const TetMesh& mesh, ShapeRegistry& registry,
                                                   int p, const CurrentDensity& j,
                                                   const QuadConfig& quad = {},
                                                   double multiplier_tol = 1e-8);

/// Patchwise orthogonality: for every vertex a and every admissible
/// piecewise affine test function q_h on the patch,
///   (psi_a j, grad q_h) + (grad psi_a x curl A_h, grad q_h) = 0.
struct OrthogonalityReport {
  double max_scaled_residual = 0.0;
  int worst_vertex = -1;
};

OrthogonalityReport check_patch_orthogonality(const TetMesh& mesh,
                                              const MagneticPotentialSolution& sol,
                                              const CurrentDensity& j, const QuadConfig& quad);

/// The same residual for a single vertex patch.
double patch_orthogonality_residual(const TetMesh& mesh, const VertexPatch& patch,
                                    const MagneticPotentialSolution& sol,
                                    const CurrentDensity& j, const QuadConfig& quad);

/// Diagnostics for piecewise-RT current densities: canonical
/// interpolation error, elementwise divergence, and normal jumps.
struct RtDataCheck {
  double max_interpolation_error = 0.0;
  double max_divergence = 0.0;
  double max_normal_jump = 0.0;
};
RtDataCheck validate_rt_current(const TetMesh& mesh, ShapeRegistry& registry,
                                const CurrentDensity& j, const QuadConfig& quad);

} // namespace curleq
