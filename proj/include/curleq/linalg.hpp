// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>
#include <vector>

namespace curleq {

/// Symmetric sparse matrix in compressed storage.
struct SparseSymMatrix {
  Eigen::SparseMatrix<double> mat;
  bool symmetric = true;

  int dimension() const { return static_cast<int>(mat.rows()); }

  static SparseSymMatrix from_triplets(int n, const std::vector<Eigen::Triplet<double>>& trips);
};

struct FactorizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleConstraints : std::runtime_error {
  double residual;
  InfeasibleConstraints(const std::string& what, double res)
      : std::runtime_error(what), residual(res) {}
};

/// Direct solve of M x = b for each column of `rhs`, with one step of
/// iterative refinement; the residual is verified to 1e-10 * ||b||.
Eigen::MatrixXd factor_solve(const SparseSymMatrix& M, const Eigen::MatrixXd& rhs);

/// Constrained least squares: minimize v^T M v - 2 v^T t (that is,
/// ||v - tau||_M^2 with t = M tau) subject to C v = d. M must be SPD on
/// the trial space; C may contain redundant rows as long as the system is
/// consistent.
struct ConstrainedLsProblem {
  Eigen::SparseMatrix<double> M;
  Eigen::VectorXd t;
  Eigen::SparseMatrix<double> C; // m x n, m may be 0
  Eigen::VectorXd d;
  double consistency_tol = 1e-8;
};

struct ConstrainedLsSolution {
  Eigen::VectorXd v;
  Eigen::VectorXd multiplier;
  double constraint_residual = 0.0; // ||C v - d||
  double objective = 0.0;           // v^T M v - 2 v^T t
};

/// Saddle-point solve of the Euler-Lagrange system with a small multiplier
/// regularization that resolves redundant constraint rows; the primal
/// minimizer is unaffected. Throws InfeasibleConstraints when the achieved
/// constraint residual exceeds the consistency tolerance (scaled).
ConstrainedLsSolution solve_constrained_ls(const ConstrainedLsProblem& p);

/// Dense oracle with the same contract: rank-revealing factorization of C,
/// null-space parametrization, and a dense SPD solve. Problem dimension
/// must not exceed 2000.
ConstrainedLsSolution dense_nullspace_qp(const ConstrainedLsProblem& p);

/// Writes the problem in an ASCII coordinate listing for offline
/// inspection.
void dump_problem(const ConstrainedLsProblem& p, const std::string& path);

/// Objective value v^T M v - 2 v^T t.
double ls_objective(const ConstrainedLsProblem& p, const Eigen::VectorXd& v);

} // namespace curleq
