#include "spinodoid/mma.hpp"

#include <algorithm>
#include <cmath>

#include "spinodoid/errors.hpp"

namespace spinodoid {

void MmaSettings::validate() const {
  if (!(move_limit > 0.0 && move_limit <= 1.0)) throw ConfigError("mma: move limit must lie in (0, 1]");
  if (!(asymptote_init > 0.0 && asymptote_decrease > 0.0 && asymptote_decrease < 1.0 && asymptote_increase > 1.0)) {
    throw ConfigError("mma: invalid asymptote factors");
  }
  if (!(albefa > 0.0 && albefa < 1.0)) throw ConfigError("mma: albefa must lie in (0, 1)");
}

Mma::Mma(Eigen::Index n, MmaSettings settings) : settings_(settings) {
  settings_.validate();
  x1_ = x2_ = Eigen::VectorXd::Zero(n);
  low_ = Eigen::VectorXd::Zero(n);
  upp_ = Eigen::VectorXd::Ones(n);
}

Eigen::VectorXd Mma::step(const Eigen::VectorXd& x, const Eigen::VectorXd& df, double g, const Eigen::VectorXd& dg,
                          const Eigen::Array<bool, Eigen::Dynamic, 1>* frozen, const ConstraintFn& exact) {
  const Eigen::Index n = x.size();
  if (df.size() != n || dg.size() != n) throw ConfigError("mma: gradient size mismatch");
  if (!df.allFinite() || !dg.allFinite() || !std::isfinite(g)) {
    throw NumericalError("mma: non-finite objective or constraint gradient");
  }
  constexpr double kRange = 1.0;  // variables live in [0, 1]
  // Asymptotes.
  for (Eigen::Index j = 0; j < n; ++j) {
    if (iter_ < 2) {
      low_[j] = x[j] - settings_.asymptote_init * kRange;
      upp_[j] = x[j] + settings_.asymptote_init * kRange;
    } else {
      const double trend = (x[j] - x1_[j]) * (x1_[j] - x2_[j]);
      const double gamma = trend < 0.0   ? settings_.asymptote_decrease
                           : trend > 0.0 ? settings_.asymptote_increase
                                         : 1.0;
      low_[j] = x[j] - gamma * (x1_[j] - low_[j]);
      upp_[j] = x[j] + gamma * (upp_[j] - x1_[j]);
      low_[j] = std::clamp(low_[j], x[j] - 10.0 * kRange, x[j] - 0.01 * kRange);
      upp_[j] = std::clamp(upp_[j], x[j] + 0.01 * kRange, x[j] + 10.0 * kRange);
    }
  }
  // Move bounds and the convex approximations.
  Eigen::VectorXd lo(n), hi(n), p0(n), q0(n), p1(n), q1(n);
  double r1 = g;
  for (Eigen::Index j = 0; j < n; ++j) {
    lo[j] = std::max({0.0, low_[j] + settings_.albefa * (x[j] - low_[j]), x[j] - settings_.move_limit});
    hi[j] = std::min({1.0, upp_[j] - settings_.albefa * (upp_[j] - x[j]), x[j] + settings_.move_limit});
    if (frozen && (*frozen)[j]) lo[j] = hi[j] = x[j];
    const double ux2 = (upp_[j] - x[j]) * (upp_[j] - x[j]);
    const double xl2 = (x[j] - low_[j]) * (x[j] - low_[j]);
    const double reg = 1e-5 / kRange;
    p0[j] = ux2 * (1.001 * std::max(df[j], 0.0) + 0.001 * std::max(-df[j], 0.0) + reg);
    q0[j] = xl2 * (0.001 * std::max(df[j], 0.0) + 1.001 * std::max(-df[j], 0.0) + reg);
    p1[j] = ux2 * std::max(dg[j], 0.0);
    q1[j] = xl2 * std::max(-dg[j], 0.0);
    r1 -= p1[j] / (upp_[j] - x[j]) + q1[j] / (x[j] - low_[j]);
  }

  auto primal = [&](double lambda, Eigen::VectorXd& y) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double sp = std::sqrt(p0[j] + lambda * p1[j]);
      const double sq = std::sqrt(q0[j] + lambda * q1[j]);
      const double v = (sp * low_[j] + sq * upp_[j]) / (sp + sq);
      y[j] = std::clamp(v, lo[j], hi[j]);
    }
  };
  auto approx_constraint = [&](const Eigen::VectorXd& y) {
    if (exact) return exact(y);
    double s = r1;
    for (Eigen::Index j = 0; j < n; ++j) s += p1[j] / (upp_[j] - y[j]) + q1[j] / (y[j] - low_[j]);
    return s;
  };

  Eigen::VectorXd y(n);
  primal(0.0, y);
  double lambda = 0.0;
  if (approx_constraint(y) > 0.0) {
    double a = 0.0, b = 1.0;
    primal(b, y);
    int expand = 0;
    while (approx_constraint(y) > 0.0 && expand < 200) {
      a = b;
      b *= 2.0;
      primal(b, y);
      ++expand;
    }
    for (int it = 0; it < 200 && (b - a) > 1e-12 * std::max(1.0, b); ++it) {
      const double mid = 0.5 * (a + b);
      primal(mid, y);
      if (approx_constraint(y) > 0.0) a = mid;
      else b = mid;
    }
    lambda = b;
    primal(lambda, y);
  }
  lambda_ = lambda;
  x2_ = iter_ >= 1 ? x1_ : x;
  x1_ = x;
  ++iter_;
  return y;
}

}  // namespace spinodoid
