#pragma once

#include <Eigen/SparseCore>
#include <memory>
#include <string>
#include <vector>

namespace spinodoid {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

enum class SolverKind {
  kCholesky,  // supernodal sparse Cholesky (CHOLMOD), factor reused across right-hand sides
  kPcg,       // conjugate gradient with a Jacobi preconditioner
};

SolverKind parse_solver_kind(const std::string& name);
std::string to_string(SolverKind kind);

struct SolverOptions {
  SolverKind kind = SolverKind::kCholesky;
  double relative_tolerance = 1e-8;
  int max_iterations = 50000;
};

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
  bool regularized = false;
  double regularization_shift = 0.0;
  std::vector<double> residual_history;  // PCG only
};

// Conjugate gradient with diagonal preconditioning. Throws NumericalError
// (with the tail of the residual history) if the tolerance is not reached.
Eigen::VectorXd pcg_solve(const SparseMatrix& a, const Eigen::VectorXd& b,
                          const SolverOptions& options, SolveStats* stats = nullptr,
                          const Eigen::VectorXd* initial_guess = nullptr);

// Solver for a symmetric positive (semi)definite system. The matrix is
// analysed once and reused for every right-hand side. A Cholesky factor that
// fails on a singular matrix is retried with a small diagonal shift; the
// shift is recorded in SolveStats.
class SpdSolver {
 public:
  SpdSolver(const SparseMatrix& a, const SolverOptions& options);
  ~SpdSolver();
  SpdSolver(const SpdSolver&) = delete;
  SpdSolver& operator=(const SpdSolver&) = delete;

  Eigen::VectorXd solve(const Eigen::VectorXd& b, SolveStats* stats = nullptr) const;

  bool regularized() const { return shift_ > 0.0; }
  double shift() const { return shift_; }

 private:
  struct Factor;
  const SparseMatrix& a_;
  SolverOptions options_;
  std::unique_ptr<Factor> factor_;
  double shift_ = 0.0;
};

}  // namespace spinodoid
