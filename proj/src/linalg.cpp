// SPDX-License-Identifier: Apache-2.0
#include "curleq/linalg.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <Eigen/SVD>
#include <fstream>

namespace curleq {

SparseSymMatrix SparseSymMatrix::from_triplets(int n,
                                               const std::vector<Eigen::Triplet<double>>& trips) {
  SparseSymMatrix s;
  s.mat.resize(n, n);
  s.mat.setFromTriplets(trips.begin(), trips.end());
  return s;
}

namespace {

// LDLT first (fast for definite and quasi-definite systems), LU as the
// robust fallback. Returns false when both factorizations fail.
struct DirectSolver {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool use_lu = false;
  const Eigen::SparseMatrix<double>* A = nullptr;

  bool factorize(const Eigen::SparseMatrix<double>& mat, bool try_ldlt) {
    A = &mat;
    if (try_ldlt) {
      ldlt.compute(mat);
      if (ldlt.info() == Eigen::Success) return true;
    }
    use_lu = true;
    lu.compute(mat);
    return lu.info() == Eigen::Success;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    return use_lu ? lu.solve(b).eval() : ldlt.solve(b).eval();
  }

  // One step of iterative refinement.
  Eigen::VectorXd solve_refined(const Eigen::VectorXd& b, int steps = 1) const {
    Eigen::VectorXd x = solve(b);
    for (int i = 0; i < steps; ++i) {
      Eigen::VectorXd r = b - (*A) * x;
      x += solve(r);
    }
    return x;
  }
};

} // namespace

Eigen::MatrixXd factor_solve(const SparseSymMatrix& M, const Eigen::MatrixXd& rhs) {
  DirectSolver solver;
  if (!solver.factorize(M.mat, M.symmetric))
    throw FactorizationError("factor_solve: factorization failed (singular to tolerance)");
  Eigen::MatrixXd out(rhs.rows(), rhs.cols());
  for (int c = 0; c < rhs.cols(); ++c) {
    Eigen::VectorXd b = rhs.col(c);
    Eigen::VectorXd x = solver.solve_refined(b);
    double res = (M.mat * x - b).norm();
    if (res > 1e-10 * std::max(1e-300, b.norm()))
      throw FactorizationError("factor_solve: residual above tolerance");
    out.col(c) = x;
  }
  return out;
}

double ls_objective(const ConstrainedLsProblem& p, const Eigen::VectorXd& v) {
  return v.dot(p.M * v) - 2.0 * v.dot(p.t);
}

ConstrainedLsSolution solve_constrained_ls(const ConstrainedLsProblem& p) {
  const int n = static_cast<int>(p.M.rows());
  const int m = static_cast<int>(p.C.rows());

  // Balance the problem: unit mass diagonal and unit constraint rows.
  double mass_scale = 0.0;
  for (int i = 0; i < n; ++i) mass_scale = std::max(mass_scale, p.M.coeff(i, i));
  if (mass_scale <= 0.0) mass_scale = 1.0;

  Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(m);
  for (int k = 0; k < p.C.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p.C, k); it; ++it)
      row_scale(it.row()) += it.value() * it.value();
  for (int i = 0; i < m; ++i) row_scale(i) = 1.0 / std::sqrt(row_scale(i));

  const double eps = 1e-12;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(p.M.nonZeros() + 2 * p.C.nonZeros() + m);
  for (int k = 0; k < p.M.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p.M, k); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value() / mass_scale);
  for (int k = 0; k < p.C.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p.C, k); it; ++it) {
      double v = it.value() * row_scale(it.row());
      trips.emplace_back(n + it.row(), it.col(), v);
      trips.emplace_back(it.col(), n + it.row(), v);
    }
  for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, -eps);

  Eigen::SparseMatrix<double> S(n + m, n + m);
  S.setFromTriplets(trips.begin(), trips.end());

  // Scaled blocks for the exact KKT residual (without the -eps I block).
  Eigen::SparseMatrix<double> Ms = p.M / mass_scale;
  Eigen::SparseMatrix<double> Cs = row_scale.asDiagonal() * p.C;

  Eigen::VectorXd b(n + m);
  b.head(n) = p.t / mass_scale;
  b.tail(m) = row_scale.asDiagonal() * p.d;

  DirectSolver solver;
  if (!solver.factorize(S, true))
    throw FactorizationError("solve_constrained_ls: saddle factorization failed");

  // The factorization solves the regularized system; refining against the
  // exact KKT residual removes the regularization bias from the primal
  // (the multiplier of redundant rows absorbs it instead).
  Eigen::VectorXd x = solver.solve(b);
  for (int step = 0; step < 3; ++step) {
    Eigen::VectorXd r(n + m);
    r.head(n) = b.head(n) - Ms * x.head(n) - Cs.transpose() * x.tail(m);
    r.tail(m) = b.tail(m) - Cs * x.head(n);
    if (r.norm() <= 1e-16 * (b.norm() + x.norm())) break;
    x += solver.solve(r);
  }

  ConstrainedLsSolution sol;
  sol.v = x.head(n);
  sol.multiplier = x.tail(m);
  for (int i = 0; i < m; ++i) sol.multiplier(i) *= row_scale(i) * mass_scale;

  double cres = m > 0 ? (p.C * sol.v - p.d).norm() : 0.0;
  sol.constraint_residual = cres;
  sol.objective = ls_objective(p, sol.v);

  double c_norm = p.C.norm();
  double scale = p.d.norm() + c_norm * sol.v.norm() + 1e-300;
  if (cres > p.consistency_tol * scale)
    throw InfeasibleConstraints(
        "solve_constrained_ls: inconsistent constraints, residual " + std::to_string(cres) +
            " (scaled tolerance " + std::to_string(p.consistency_tol * scale) + ")",
        cres);
  return sol;
}

ConstrainedLsSolution dense_nullspace_qp(const ConstrainedLsProblem& p) {
  const int n = static_cast<int>(p.M.rows());
  const int m = static_cast<int>(p.C.rows());
  if (n > 2000) throw std::invalid_argument("dense_nullspace_qp: dimension above 2000");

  Eigen::MatrixXd M = Eigen::MatrixXd(p.M);
  ConstrainedLsSolution sol;

  Eigen::MatrixXd Z;          // null-space basis of C
  Eigen::VectorXd v0;         // particular solution
  if (m == 0) {
    Z = Eigen::MatrixXd::Identity(n, n);
    v0 = Eigen::VectorXd::Zero(n);
  } else {
    Eigen::MatrixXd C = Eigen::MatrixXd(p.C);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeThinU | Eigen::ComputeFullV);
    double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    double tol = std::max(m, n) * 1e-13 * std::max(smax, 1e-300);
    int rank = 0;
    while (rank < svd.singularValues().size() && svd.singularValues()(rank) > tol) ++rank;
    Eigen::VectorXd ud = svd.matrixU().leftCols(rank).transpose() * p.d;
    v0 = svd.matrixV().leftCols(rank) *
         ud.cwiseQuotient(svd.singularValues().head(rank));
    Z = svd.matrixV().rightCols(n - rank);

    double cres = (C * v0 - p.d).norm();
    double scale = p.d.norm() + C.norm() * v0.norm() + 1e-300;
    if (cres > p.consistency_tol * scale)
      throw InfeasibleConstraints("dense_nullspace_qp: inconsistent constraints", cres);
  }

  if (Z.cols() > 0) {
    Eigen::MatrixXd Mz = Z.transpose() * M * Z;
    Eigen::VectorXd rhs = Z.transpose() * (p.t - M * v0);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Mz);
    if (ldlt.info() != Eigen::Success)
      throw FactorizationError("dense_nullspace_qp: reduced system not SPD");
    sol.v = v0 + Z * ldlt.solve(rhs);
  } else {
    sol.v = v0;
  }
  sol.multiplier = Eigen::VectorXd::Zero(m);
  sol.constraint_residual = m > 0 ? (p.C * sol.v - p.d).norm() : 0.0;
  sol.objective = ls_objective(p, sol.v);
  return sol;
}

void dump_problem(const ConstrainedLsProblem& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dump_problem: cannot open " + path);
  out.precision(17);
  auto dump_sparse = [&](const char* name, const Eigen::SparseMatrix<double>& A) {
    out << name << " " << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
    for (int k = 0; k < A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
        out << it.row() << " " << it.col() << " " << it.value() << "\n";
  };
  dump_sparse("matrix M", p.M);
  out << "vector t " << p.t.size() << "\n";
  for (int i = 0; i < p.t.size(); ++i) out << p.t(i) << "\n";
  dump_sparse("matrix C", p.C);
  out << "vector d " << p.d.size() << "\n";
  for (int i = 0; i < p.d.size(); ++i) out << p.d(i) << "\n";
}

} // namespace curleq
