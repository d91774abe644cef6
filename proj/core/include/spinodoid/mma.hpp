#pragma once

#include <Eigen/Core>
#include <functional>

namespace spinodoid {

struct MmaSettings {
  double move_limit = 0.05;
  double asymptote_init = 0.5;
  double asymptote_increase = 1.2;
  double asymptote_decrease = 0.7;
  double albefa = 0.1;

  void validate() const;
};

// Method of moving asymptotes for
//   min f(x)  s.t.  g(x) <= 0,  0 <= x <= 1
// with a single constraint. Each step minimizes the separable convex
// approximation; the constraint multiplier is found by bisection on the dual.
class Mma {
 public:
  Mma(Eigen::Index n, MmaSettings settings = {});

  using ConstraintFn = std::function<double(const Eigen::VectorXd&)>;

  // Returns the next iterate from x with objective gradient df, constraint
  // value g and gradient dg. Variables with `frozen[j]` true stay fixed.
  // With `exact`, the multiplier is bisected on exact(y) instead of the
  // convex approximation; exact must decrease along the dual path.
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& df, double g, const Eigen::VectorXd& dg,
                       const Eigen::Array<bool, Eigen::Dynamic, 1>* frozen = nullptr,
                       const ConstraintFn& exact = {});

  void set_move_limit(double m) { settings_.move_limit = m; }
  double last_multiplier() const { return lambda_; }
  int iteration() const { return iter_; }

 private:
  MmaSettings settings_;
  int iter_ = 0;
  Eigen::VectorXd x1_, x2_, low_, upp_;
  double lambda_ = 0.0;
};

}  // namespace spinodoid
