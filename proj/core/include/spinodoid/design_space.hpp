#pragma once

#include <array>

#include "spinodoid/elasticity.hpp"
#include "spinodoid/spinodoid_gen.hpp"
#include "spinodoid/surrogate.hpp"
#include "spinodoid/types.hpp"

namespace spinodoid {

using Vector5d = Eigen::Matrix<double, 5, 1>;

// Optimizer-facing descriptor (rho, theta1, theta2, theta3, alpha), angles in
// radians. The box is rho in [0, 1], theta_i in [0, pi/2], alpha in
// [-pi/2, pi/2]; admissibility is produced by the transform.
struct DesignParamsChi {
  double rho = 0.5;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;
  double alpha = 0.0;

  Vector4d theta() const { return {rho, theta1, theta2, theta3}; }
  Vector5d as_vector() const { return (Vector5d() << rho, theta1, theta2, theta3, alpha).finished(); }
  static DesignParamsChi from_vector(const Vector5d& v) { return {v[0], v[1], v[2], v[3], v[4]}; }

  // Throws DomainError outside the box.
  void validate() const;
};

struct TransformConfig {
  double lambda1 = 600.0;
  double lambda2 = 60.0 * 180.0 / kPi;  // 1/rad
  double rho_min = kRhoMin;
  double theta_min = kThetaMin;

  void validate() const;
};

// rho' = rho / (1 + exp(-l1 (rho - rho_min)))
// theta'_i = max(theta_i, theta_min) / (1 + exp(-l2 (theta_i - theta_min / 2)))
Vector4d transform_f(const Vector4d& theta, const TransformConfig& cfg);
// Diagonal of the Jacobian; right derivative at theta_i = theta_min.
Vector4d transform_f_jacobian(const Vector4d& theta, const TransformConfig& cfg);
double transform_rho(double rho, const TransformConfig& cfg, double* derivative = nullptr);

// Voigt stress transformation for a rotation by alpha about e3.
Matrix6d rotation_matrix_voigt(double alpha);
Matrix6d rotation_matrix_derivative(double alpha);

struct DesignSpaceConfig {
  TransformConfig transform;
  // Isotropic floor eps * C_s added to every element stiffness.
  double stiffness_floor = 1e-6;
  BaseMaterial base;
  // C1 gate g(rho') multiplying the surrogate stiffness: 0 below lo, 1 above hi.
  bool void_gate = true;
  double void_gate_lo = 0.02;
  double void_gate_hi = 0.08;
  // Eigenvalues of the surrogate matrix below delta are mapped smoothly to
  // delta exp((l - delta) / delta); 0 disables. Units of E_s.
  double spectral_floor = 1e-4;

  void validate() const;
};

double void_gate(double rho_t, const DesignSpaceConfig& cfg, double* derivative = nullptr);

// Matrix function F(C) = V f(L) V^T with f the spectral floor above; F is the
// identity on matrices whose eigenvalues are all >= delta.
class SpectralFloor {
 public:
  SpectralFloor(const Matrix6d& c, double delta);
  const Matrix6d& value() const { return value_; }
  bool active() const { return active_; }
  // dF for a symmetric perturbation dC.
  Matrix6d derivative(const Matrix6d& dc) const;

 private:
  Matrix6d v_, gamma_, value_;
  bool active_ = false;
};

struct MicroResponse {
  VoigtStiffness c = VoigtStiffness::Zero();  // g T F(C_v(f(Theta))) T^T + floor
  std::array<Matrix6d, 5> dc{};               // d c / d chi_j, j = rho, theta1..3, alpha
  Vector4d theta_t = Vector4d::Zero();        // f(Theta)
};

MicroResponse evaluate_micro(const DesignParamsChi& chi, const MlpModel& model, const DesignSpaceConfig& cfg,
                             bool with_sensitivity);

// Same as evaluate_micro for a whole element field, with one batched
// surrogate evaluation.
std::vector<MicroResponse> evaluate_micro_batch(const std::vector<DesignParamsChi>& field, const MlpModel& model,
                                                const DesignSpaceConfig& cfg, bool with_sensitivity);

VoigtStiffness effective_stiffness(const DesignParamsChi& chi, const MlpModel& model, const DesignSpaceConfig& cfg);
std::array<Matrix6d, 5> effective_stiffness_sensitivity(const DesignParamsChi& chi, const MlpModel& model,
                                                        const DesignSpaceConfig& cfg);

}  // namespace spinodoid
