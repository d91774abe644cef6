#include "spinodoid/linear_solver.hpp"

#include <Eigen/CholmodSupport>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "spinodoid/errors.hpp"

namespace spinodoid {

SolverKind parse_solver_kind(const std::string& name) {
  if (name == "cholesky") return SolverKind::kCholesky;
  if (name == "pcg") return SolverKind::kPcg;
  throw ConfigError("unknown linear solver '" + name + "' (expected cholesky or pcg)");
}

std::string to_string(SolverKind kind) {
  return kind == SolverKind::kCholesky ? "cholesky" : "pcg";
}

Eigen::VectorXd pcg_solve(const SparseMatrix& a, const Eigen::VectorXd& b,
                          const SolverOptions& options, SolveStats* stats,
                          const Eigen::VectorXd* initial_guess) {
  const Eigen::Index n = b.size();
  Eigen::VectorXd inv_diag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = a.coeff(i, i);
    inv_diag[i] = d > 0.0 ? 1.0 / d : 1.0;
  }
  Eigen::VectorXd x = initial_guess ? *initial_guess : Eigen::VectorXd::Zero(n);
  const double b_norm = b.norm();
  std::vector<double> history;
  if (b_norm == 0.0) {
    if (stats) *stats = SolveStats{};
    return Eigen::VectorXd::Zero(n);
  }
  Eigen::VectorXd r = b - a * x;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd p = z;
  Eigen::VectorXd ap(n);
  double rz = r.dot(z);
  double rel = r.norm() / b_norm;
  history.push_back(rel);
  int it = 0;
  while (rel > options.relative_tolerance && it < options.max_iterations) {
    ap.noalias() = a * p;
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) {
      throw NumericalError("pcg: matrix is not positive definite (p.Ap = " + std::to_string(pap) +
                           " at iteration " + std::to_string(it) + ")");
    }
    const double step = rz / pap;
    x.noalias() += step * p;
    r.noalias() -= step * ap;
    z = inv_diag.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
    rel = r.norm() / b_norm;
    history.push_back(rel);
    ++it;
  }
  if (rel > options.relative_tolerance || !std::isfinite(rel)) {
    std::ostringstream msg;
    msg << "pcg: no convergence after " << it << " iterations; relative residual " << rel
        << " > " << options.relative_tolerance << "; residual history tail:";
    const std::size_t from = history.size() > 5 ? history.size() - 5 : 0;
    for (std::size_t i = from; i < history.size(); ++i) msg << ' ' << history[i];
    throw NumericalError(msg.str());
  }
  if (stats) {
    stats->iterations = it;
    stats->relative_residual = rel;
    stats->regularized = false;
    stats->residual_history = std::move(history);
  }
  return x;
}

struct SpdSolver::Factor {
  Eigen::CholmodSupernodalLLT<SparseMatrix, Eigen::Lower> llt;
};

SpdSolver::SpdSolver(const SparseMatrix& a, const SolverOptions& options)
    : a_(a), options_(options) {
  if (options_.kind != SolverKind::kCholesky) return;
  factor_ = std::make_unique<Factor>();
  factor_->llt.compute(a_);
  if (factor_->llt.info() == Eigen::Success) return;

  // Singular or indefinite: shift the diagonal and refactor.
  double mean_diag = 0.0;
  for (Eigen::Index i = 0; i < a_.rows(); ++i) mean_diag += std::abs(a_.coeff(i, i));
  mean_diag /= std::max<Eigen::Index>(1, a_.rows());
  for (double rel_shift : {1e-12, 1e-10, 1e-8}) {
    shift_ = rel_shift * mean_diag;
    factor_->llt.setShift(shift_);
    factor_->llt.factorize(a_);
    if (factor_->llt.info() == Eigen::Success) return;
  }
  throw NumericalError("cholesky: factorization failed even with diagonal regularization");
}

SpdSolver::~SpdSolver() = default;

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& b, SolveStats* stats) const {
  if (options_.kind == SolverKind::kPcg) return pcg_solve(a_, b, options_, stats);

  Eigen::VectorXd x = factor_->llt.solve(b);
  if (factor_->llt.info() != Eigen::Success) throw NumericalError("cholesky: triangular solve failed");
  const double b_norm = b.norm();
  double rel = b_norm > 0.0 ? (a_ * x - b).norm() / b_norm : 0.0;
  for (int refine = 0; refine < 2 && shift_ == 0.0 && rel > options_.relative_tolerance; ++refine) {
    x += factor_->llt.solve(b - a_ * x);
    rel = (a_ * x - b).norm() / b_norm;
  }
  if (!std::isfinite(rel)) throw NumericalError("cholesky: non-finite solution");
  if (shift_ == 0.0 && rel > std::max(options_.relative_tolerance, 1e-6)) {
    throw NumericalError("cholesky: relative residual " + std::to_string(rel) +
                         " exceeds tolerance");
  }
  if (stats) {
    stats->iterations = 0;
    stats->relative_residual = rel;
    stats->regularized = shift_ > 0.0;
    stats->regularization_shift = shift_;
    stats->residual_history.clear();
  }
  return x;
}

}  // namespace spinodoid
