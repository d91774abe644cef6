#include "spinodoid/design_space.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <string>

#include "spinodoid/errors.hpp"

namespace spinodoid {

namespace {

constexpr double kBoxSlack = 1e-12;

// 1 / (1 + exp(-t)) without overflow.
double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

void DesignParamsChi::validate() const {
  auto check = [](double v, double lo, double hi, const char* name) {
    if (!(v >= lo - kBoxSlack && v <= hi + kBoxSlack)) {
      throw DomainError(std::string("design field: ") + name + " = " + std::to_string(v) + " outside [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  };
  check(rho, 0.0, 1.0, "rho");
  check(theta1, 0.0, kPi / 2.0, "theta1");
  check(theta2, 0.0, kPi / 2.0, "theta2");
  check(theta3, 0.0, kPi / 2.0, "theta3");
  check(alpha, -kPi / 2.0, kPi / 2.0, "alpha");
}

void TransformConfig::validate() const {
  if (!(lambda1 > 0.0 && lambda2 > 0.0)) throw ConfigError("transform: lambda1 and lambda2 must be positive");
  if (!(rho_min > 0.0 && rho_min < 1.0)) throw ConfigError("transform: rho_min must lie in (0, 1)");
  if (!(theta_min > 0.0 && theta_min < kPi / 2.0)) throw ConfigError("transform: theta_min must lie in (0, pi/2)");
}

double transform_rho(double rho, const TransformConfig& cfg, double* derivative) {
  const double s = sigmoid(cfg.lambda1 * (rho - cfg.rho_min));
  if (derivative) *derivative = s + rho * cfg.lambda1 * s * (1.0 - s);
  return rho * s;
}

Vector4d transform_f(const Vector4d& theta, const TransformConfig& cfg) {
  Vector4d out;
  out[0] = transform_rho(theta[0], cfg);
  for (int i = 1; i < 4; ++i) {
    out[i] = std::max(theta[i], cfg.theta_min) * sigmoid(cfg.lambda2 * (theta[i] - cfg.theta_min / 2.0));
  }
  return out;
}

Vector4d transform_f_jacobian(const Vector4d& theta, const TransformConfig& cfg) {
  Vector4d d;
  transform_rho(theta[0], cfg, &d[0]);
  for (int i = 1; i < 4; ++i) {
    const double s = sigmoid(cfg.lambda2 * (theta[i] - cfg.theta_min / 2.0));
    const bool above = theta[i] >= cfg.theta_min;  // right derivative at the kink
    const double m = above ? theta[i] : cfg.theta_min;
    d[i] = (above ? s : 0.0) + m * cfg.lambda2 * s * (1.0 - s);
  }
  return d;
}

Matrix6d rotation_matrix_voigt(double alpha) {
  const double c = std::cos(alpha), s = std::sin(alpha);
  Matrix6d t = Matrix6d::Zero();
  t(0, 0) = c * c;
  t(0, 1) = s * s;
  t(0, 5) = 2.0 * s * c;
  t(1, 0) = s * s;
  t(1, 1) = c * c;
  t(1, 5) = -2.0 * s * c;
  t(2, 2) = 1.0;
  t(3, 3) = c;
  t(3, 4) = -s;
  t(4, 3) = s;
  t(4, 4) = c;
  t(5, 0) = -c * s;
  t(5, 1) = c * s;
  t(5, 5) = c * c - s * s;
  return t;
}

Matrix6d rotation_matrix_derivative(double alpha) {
  const double c = std::cos(alpha), s = std::sin(alpha);
  const double c2 = std::cos(2.0 * alpha), s2 = std::sin(2.0 * alpha);
  Matrix6d d = Matrix6d::Zero();
  d(0, 0) = -s2;
  d(0, 1) = s2;
  d(0, 5) = 2.0 * c2;
  d(1, 0) = s2;
  d(1, 1) = -s2;
  d(1, 5) = -2.0 * c2;
  d(3, 3) = -s;
  d(3, 4) = -c;
  d(4, 3) = c;
  d(4, 4) = -s;
  d(5, 0) = -c2;
  d(5, 1) = c2;
  d(5, 5) = -2.0 * s2;
  return d;
}

void DesignSpaceConfig::validate() const {
  transform.validate();
  base.validate();
  if (!(stiffness_floor >= 0.0)) throw ConfigError("design space: stiffness floor must be non-negative");
  if (void_gate && !(void_gate_lo >= 0.0 && void_gate_lo < void_gate_hi && void_gate_hi < transform.rho_min)) {
    throw ConfigError("design space: need 0 <= void_gate_lo < void_gate_hi < rho_min");
  }
  if (!(spectral_floor >= 0.0)) throw ConfigError("design space: spectral floor must be non-negative");
}

SpectralFloor::SpectralFloor(const Matrix6d& c, double delta) {
  Eigen::SelfAdjointEigenSolver<Matrix6d> es(c);
  if (es.info() != Eigen::Success) throw NumericalError("spectral floor: eigen decomposition failed");
  const Vector6d lam = es.eigenvalues();
  active_ = delta > 0.0 && (lam.array() < delta).any();
  if (!active_) {
    value_ = c;
    return;
  }
  v_ = es.eigenvectors();
  auto f = [delta](double l) { return l >= delta ? l : delta * std::exp((l - delta) / delta); };
  auto fp = [delta](double l) { return l >= delta ? 1.0 : std::exp((l - delta) / delta); };
  Vector6d fl;
  for (int i = 0; i < 6; ++i) fl[i] = f(lam[i]);
  // Divided differences of f; f' on (near) coincident eigenvalues.
  const double tiny = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      const double d = lam[i] - lam[j];
      gamma_(i, j) = std::abs(d) > tiny ? (fl[i] - fl[j]) / d : fp(0.5 * (lam[i] + lam[j]));
    }
  }
  value_ = v_ * fl.asDiagonal() * v_.transpose();
}

Matrix6d SpectralFloor::derivative(const Matrix6d& dc) const {
  if (!active_) return dc;
  const Matrix6d m = v_.transpose() * dc * v_;
  return v_ * gamma_.cwiseProduct(m) * v_.transpose();
}

double void_gate(double rho_t, const DesignSpaceConfig& cfg, double* derivative) {
  if (!cfg.void_gate) {
    if (derivative) *derivative = 0.0;
    return 1.0;
  }
  const double w = cfg.void_gate_hi - cfg.void_gate_lo;
  const double t = (rho_t - cfg.void_gate_lo) / w;
  if (t <= 0.0 || t >= 1.0) {
    if (derivative) *derivative = 0.0;
    return t <= 0.0 ? 0.0 : 1.0;
  }
  if (derivative) *derivative = 6.0 * t * (1.0 - t) / w;
  return t * t * (3.0 - 2.0 * t);
}

namespace {

// Assembles the response from the surrogate output s and its Jacobian ds
// (9 x 4, columns w.r.t. theta').
void finish_response(MicroResponse& out, const DesignParamsChi& chi, const OrthotropicNine& s, const Matrix94d* ds,
                     const DesignSpaceConfig& cfg, const VoigtStiffness& floor) {
  const Vector4d theta = chi.theta();
  double dgate = 0.0;
  const double gate = void_gate(out.theta_t[0], cfg, &dgate);
  const SpectralFloor pd(expand_orthotropic(s), cfg.spectral_floor);
  const VoigtStiffness& cv_raw = pd.value();
  const Matrix6d t = rotation_matrix_voigt(chi.alpha);
  out.c = gate * (t * cv_raw * t.transpose()) + floor;
  if (!ds) return;

  const Vector4d df = transform_f_jacobian(theta, cfg.transform);
  for (int j = 0; j < 4; ++j) {
    // d expand(S) / d theta'_j, then chain through the diagonal transform.
    const OrthotropicNine col = ds->col(j);
    VoigtStiffness dcv = gate * pd.derivative(expand_orthotropic(col));
    if (j == 0) dcv += dgate * cv_raw;
    out.dc[j] = df[j] * (t * dcv * t.transpose());
  }
  const Matrix6d dt = rotation_matrix_derivative(chi.alpha);
  out.dc[4] = gate * (dt * cv_raw * t.transpose() + t * cv_raw * dt.transpose());
}

}  // namespace

MicroResponse evaluate_micro(const DesignParamsChi& chi, const MlpModel& model, const DesignSpaceConfig& cfg,
                             bool with_sensitivity) {
  MicroResponse out;
  out.theta_t = transform_f(chi.theta(), cfg.transform);
  Eigen::VectorXd s;
  Eigen::MatrixXd ds;
  model.forward_with_jacobian(out.theta_t, &s, with_sensitivity ? &ds : nullptr);
  const VoigtStiffness floor = cfg.stiffness_floor * base_material_stiffness(cfg.base);
  const Matrix94d ds_fixed = with_sensitivity ? Matrix94d(ds) : Matrix94d::Zero();
  finish_response(out, chi, s, with_sensitivity ? &ds_fixed : nullptr, cfg, floor);
  return out;
}

std::vector<MicroResponse> evaluate_micro_batch(const std::vector<DesignParamsChi>& field, const MlpModel& model,
                                                const DesignSpaceConfig& cfg, bool with_sensitivity) {
  const auto n = static_cast<Eigen::Index>(field.size());
  std::vector<MicroResponse> out(field.size());
  Eigen::MatrixXd x(4, n);
  for (Eigen::Index e = 0; e < n; ++e) {
    out[e].theta_t = transform_f(field[e].theta(), cfg.transform);
    x.col(e) = out[e].theta_t;
  }
  Eigen::MatrixXd y;
  std::vector<Eigen::MatrixXd> jac;
  model.forward_batch_with_jacobian(x, &y, with_sensitivity ? &jac : nullptr);
  const VoigtStiffness floor = cfg.stiffness_floor * base_material_stiffness(cfg.base);
  Matrix94d ds = Matrix94d::Zero();
  for (Eigen::Index e = 0; e < n; ++e) {
    if (with_sensitivity) {
      for (int j = 0; j < 4; ++j) ds.col(j) = jac[j].col(e);
    }
    finish_response(out[e], field[e], y.col(e), with_sensitivity ? &ds : nullptr, cfg, floor);
  }
  return out;
}

VoigtStiffness effective_stiffness(const DesignParamsChi& chi, const MlpModel& model, const DesignSpaceConfig& cfg) {
  return evaluate_micro(chi, model, cfg, false).c;
}

std::array<Matrix6d, 5> effective_stiffness_sensitivity(const DesignParamsChi& chi, const MlpModel& model,
                                                        const DesignSpaceConfig& cfg) {
  return evaluate_micro(chi, model, cfg, true).dc;
}

}  // namespace spinodoid
