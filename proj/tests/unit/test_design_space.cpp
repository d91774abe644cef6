#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <random>

#include "spinodoid/design_space.hpp"
#include "spinodoid/errors.hpp"
#include "test_models.hpp"

using namespace spinodoid;
using spinodoid::testing::isotropic_matrix;
using spinodoid::testing::isotropic_nine;
using spinodoid::testing::random_model;

namespace {

Vector6d voigt_stress(const Eigen::Matrix3d& s) { return (Vector6d() << s(0, 0), s(1, 1), s(2, 2), s(1, 2), s(2, 0), s(0, 1)).finished(); }

Eigen::Matrix3d rot_e3(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

DesignParamsChi random_chi(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Keep clear of the transform kinks at rho_min and theta_min.
  auto angle = [&]() { return deg2rad(u(gen) < 0.5 ? 35.0 + 50.0 * u(gen) : 2.0 + 8.0 * u(gen)); };
  return {0.35 + 0.6 * u(gen), angle(), angle(), angle(), (u(gen) - 0.5) * 3.0};
}

Matrix6d random_orthogonal(std::mt19937_64& gen) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix6d a;
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n01(gen);
  return Eigen::HouseholderQR<Matrix6d>(a).householderQ();
}

Matrix6d random_symmetric(std::mt19937_64& gen) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix6d a;
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n01(gen);
  return 0.5 * (a + a.transpose());
}

}  // namespace

TEST(Transform, DensityValues) {
  const TransformConfig cfg;
  EXPECT_NEAR(transform_rho(0.5, cfg), 0.5, 1e-15);
  EXPECT_NEAR(transform_rho(0.3, cfg), 0.15, 1e-15);
  EXPECT_NEAR(transform_rho(0.0, cfg), 0.0, 1e-15);
  double d = 0.0;
  transform_rho(0.9, cfg, &d);
  EXPECT_NEAR(d, 1.0, 1e-12);
}

TEST(Transform, AngleValues) {
  const TransformConfig cfg;
  const Vector4d out = transform_f(Vector4d(0.5, 0.0, kPi / 6, kPi / 2), cfg);
  // theta = 0: theta_min / (1 + exp(l2 theta_min / 2)).
  EXPECT_NEAR(out[1], 0.0, 1e-200);
  EXPECT_NEAR(out[2], kPi / 6, 1e-12);
  EXPECT_NEAR(out[3], kPi / 2, 1e-12);
  // The sigmoid midpoint sits at theta_min / 2.
  EXPECT_NEAR(transform_f(Vector4d(0.5, kPi / 12, 0, 0), cfg)[1], kPi / 12, 1e-15);
}

TEST(Transform, JacobianMatchesFiniteDifferences) {
  const TransformConfig cfg;
  std::mt19937_64 gen(1);
  for (int t = 0; t < 50; ++t) {
    const DesignParamsChi chi = random_chi(gen);
    const Vector4d x = chi.theta();
    const Vector4d jac = transform_f_jacobian(x, cfg);
    for (int j = 0; j < 4; ++j) {
      const double h = 1e-7;
      Vector4d xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double fd = (transform_f(xp, cfg)[j] - transform_f(xm, cfg)[j]) / (2 * h);
      EXPECT_NEAR(jac[j], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
  EXPECT_LT(transform_f_jacobian(Vector4d(0.5, 0.01, 0.5, 0.5), cfg)[1], 1e-30);
}

TEST(Rotation, IdentityAndInverse) {
  EXPECT_EQ(rotation_matrix_voigt(0.0), Matrix6d::Identity());
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int t = 0; t < 20; ++t) {
    const double a = u(gen);
    EXPECT_LT((rotation_matrix_voigt(a) * rotation_matrix_voigt(-a) - Matrix6d::Identity()).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

TEST(Rotation, IsStressTransformOfNegativeTurn) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0, 1);
  for (double a : {0.3, -1.1, 2.0}) {
    Eigen::Matrix3d s;
    for (int i = 0; i < 9; ++i) s.data()[i] = n(gen);
    s = (s + s.transpose()).eval();
    const Eigen::Matrix3d r = rot_e3(-a);
    EXPECT_LT((rotation_matrix_voigt(a) * voigt_stress(s) - voigt_stress(r * s * r.transpose())).norm(), 1e-12);
  }
}

TEST(Rotation, QuarterTurnSwapsAxes) {
  OrthotropicNine s;
  s << 3.0, 0.4, 0.5, 1.0, 0.6, 2.0, 0.7, 0.8, 0.9;
  const Matrix6d c = expand_orthotropic(s);
  const Matrix6d t = rotation_matrix_voigt(kPi / 2);
  const Matrix6d r = t * c * t.transpose();
  EXPECT_NEAR(r(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(r(1, 1), 3.0, 1e-14);
  EXPECT_NEAR(r(0, 2), 0.6, 1e-14);
  EXPECT_NEAR(r(3, 3), 0.8, 1e-14);
  EXPECT_NEAR(r(4, 4), 0.7, 1e-14);
  EXPECT_NEAR(r(5, 5), 0.9, 1e-14);
}

TEST(Rotation, IsotropyAndHalfTurnInvariance) {
  const Matrix6d iso = isotropic_matrix(1.0, 0.3);
  OrthotropicNine s;
  s << 3.0, 0.4, 0.5, 1.0, 0.6, 2.0, 0.7, 0.8, 0.9;
  const Matrix6d c = expand_orthotropic(s);
  for (double a : {0.1, 0.7, -1.3, 1.5}) {
    const Matrix6d t = rotation_matrix_voigt(a);
    EXPECT_LT((t * iso * t.transpose() - iso).cwiseAbs().maxCoeff(), 1e-10);
    const Matrix6d u = rotation_matrix_voigt(a - kPi);
    EXPECT_LT((t * c * t.transpose() - u * c * u.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Rotation, DerivativeMatchesFiniteDifferences) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int t = 0; t < 20; ++t) {
    const double a = u(gen);
    const double h = 1e-6;
    const Matrix6d fd = (rotation_matrix_voigt(a + h) - rotation_matrix_voigt(a - h)) / (2 * h);
    const Matrix6d d = rotation_matrix_derivative(a);
    EXPECT_LT((d - fd).norm() / d.norm(), 1e-8);
  }
  const Matrix6d d0 = rotation_matrix_derivative(0.0);
  EXPECT_NEAR(d0(0, 5), 2.0, 1e-15);
  EXPECT_NEAR(d0(1, 5), -2.0, 1e-15);
  EXPECT_NEAR(d0(3, 4), -1.0, 1e-15);
  EXPECT_NEAR(d0(4, 3), 1.0, 1e-15);
  EXPECT_NEAR(d0(5, 0), -1.0, 1e-15);
  EXPECT_NEAR(d0(5, 1), 1.0, 1e-15);
}

TEST(EffectiveStiffness, ZeroRotationIsSurrogatePlusFloor) {
  const MlpModel m = random_model({4, 16, 16, 9}, 5);
  DesignSpaceConfig cfg;
  const DesignParamsChi chi{0.6, 0.8, 0.0, 1.2, 0.0};
  const Vector4d t = transform_f(chi.theta(), cfg.transform);
  const Matrix6d expected = expand_orthotropic(predict_moduli(m, t)) + cfg.stiffness_floor * isotropic_matrix(1, 0.3);
  EXPECT_LT((effective_stiffness(chi, m, cfg) - expected).norm(), 1e-14 * expected.norm());
}

TEST(EffectiveStiffness, IsotropicInvariantUnderRotation) {
  const MlpModel m = spinodoid::testing::constant_model(isotropic_nine(0.4, 0.3));
  const DesignSpaceConfig cfg;
  const DesignParamsChi a{0.6, 0.8, 0.0, 1.2, 0.0}, b{0.6, 0.8, 0.0, 1.2, 1.1};
  EXPECT_LT((effective_stiffness(a, m, cfg) - effective_stiffness(b, m, cfg)).norm(), 1e-10);
  EXPECT_LT(effective_stiffness_sensitivity(b, m, cfg)[4].norm(), 1e-10);
}

TEST(EffectiveStiffness, VoidBelowMinimumDensity) {
  const MlpModel m = spinodoid::testing::density_linear_model();
  const DesignSpaceConfig cfg;
  const Matrix6d cs = isotropic_matrix(1.0, 0.3);
  const Matrix6d c = effective_stiffness({0.1, 0.8, 0.8, 0.8, 0.3}, m, cfg);
  EXPECT_LE(c.norm(), 2.0 * cfg.stiffness_floor * cs.norm());
}

TEST(EffectiveStiffness, SensitivityMatchesFiniteDifferences) {
  const MlpModel m = random_model({4, 32, 32, 9}, 6);
  const DesignSpaceConfig cfg;
  std::mt19937_64 gen(7);
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    const DesignParamsChi chi = random_chi(gen);
    const auto dc = effective_stiffness_sensitivity(chi, m, cfg);
    for (int j = 0; j < 5; ++j) {
      const double h = 1e-6;
      Vector5d vp = chi.as_vector(), vm = chi.as_vector(), v0 = chi.as_vector();
      vp[j] += h;
      vm[j] -= h;
      const Matrix6d cp = effective_stiffness(DesignParamsChi::from_vector(vp), m, cfg);
      const Matrix6d cm = effective_stiffness(DesignParamsChi::from_vector(vm), m, cfg);
      const Matrix6d c0 = effective_stiffness(DesignParamsChi::from_vector(v0), m, cfg);
      const Matrix6d fd = (cp - cm) / (2 * h);
      // Skip ReLU kink crossings (one-sided slopes disagree).
      if (((cp - c0) / h - (c0 - cm) / h).norm() > 1e-3 * (1e-3 + fd.norm())) continue;
      const double scale = std::max(fd.norm(), 1e-8);
      EXPECT_LT((dc[j] - fd).norm() / scale, 1e-4) << "slot " << j;
      ++checked;
    }
  }
  EXPECT_GT(checked, 80);
}

TEST(EffectiveStiffness, BatchMatchesSingle) {
  const MlpModel m = random_model({4, 16, 9}, 8);
  const DesignSpaceConfig cfg;
  std::mt19937_64 gen(9);
  std::vector<DesignParamsChi> field;
  for (int i = 0; i < 6; ++i) field.push_back(random_chi(gen));
  const auto batch = evaluate_micro_batch(field, m, cfg, true);
  for (int i = 0; i < 6; ++i) {
    const MicroResponse one = evaluate_micro(field[i], m, cfg, true);
    EXPECT_LT((batch[i].c - one.c).norm(), 1e-13 * one.c.norm());
    for (int j = 0; j < 5; ++j) EXPECT_LT((batch[i].dc[j] - one.dc[j]).norm(), 1e-12 * (1 + one.dc[j].norm()));
  }
}

TEST(SpectralFloor, IdentityOnPositiveDefinite) {
  const Matrix6d c = isotropic_matrix(0.2, 0.3);
  const SpectralFloor f(c, 1e-4);
  EXPECT_FALSE(f.active());
  EXPECT_EQ(f.value(), c);
  std::mt19937_64 gen(3);
  const Matrix6d dc = random_symmetric(gen);
  EXPECT_EQ(f.derivative(dc), dc);
  EXPECT_FALSE(SpectralFloor(-c, 0.0).active());
}

TEST(SpectralFloor, MapsIndefiniteToPositive) {
  std::mt19937_64 gen(4);
  const double delta = 1e-3;
  const Matrix6d v = random_orthogonal(gen);
  Vector6d lam;
  lam << -0.2, -1e-3, 5e-4, 0.01, 0.3, 1.0;
  const SpectralFloor f(v * lam.asDiagonal() * v.transpose(), delta);
  EXPECT_TRUE(f.active());
  Vector6d got = Eigen::SelfAdjointEigenSolver<Matrix6d>(f.value()).eigenvalues();
  Vector6d want;
  want << delta * std::exp(-0.2 / delta - 1), delta * std::exp(-2.0), delta * std::exp(-0.5), 0.01, 0.3, 1.0;
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(got[i], want[i], 1e-14) << i;
}

TEST(SpectralFloor, DerivativeMatchesFiniteDifferences) {
  std::mt19937_64 gen(5);
  const double delta = 1e-4;
  Vector6d spread, repeated;
  spread << -0.05, -1e-5, 5e-5, 2e-4, 0.3, 1.0;
  repeated << -0.01, -0.01, 0.5, 0.5, 0.5, 1.0;
  for (const Vector6d& lam : {spread, repeated}) {
    const Matrix6d v = random_orthogonal(gen);
    const Matrix6d c = v * lam.asDiagonal() * v.transpose();
    const Matrix6d dc = random_symmetric(gen);
    const double h = 1e-9;
    const Matrix6d fd = (SpectralFloor(c + h * dc, delta).value() - SpectralFloor(c - h * dc, delta).value()) / (2 * h);
    const Matrix6d an = SpectralFloor(c, delta).derivative(dc);
    EXPECT_LT((an - fd).norm(), 1e-5 * fd.norm());
  }
}

TEST(EffectiveStiffness, IndefiniteSurrogateIsFloored) {
  const MlpModel m = random_model({4, 32, 32, 9}, 16, 0.5);
  const DesignSpaceConfig cfg;
  std::mt19937_64 gen(17);
  int indefinite = 0, checked = 0;
  for (int t = 0; t < 20; ++t) {
    const DesignParamsChi chi = random_chi(gen);
    const Vector4d th = transform_f(chi.theta(), cfg.transform);
    if (min_eigenvalue(expand_orthotropic(predict_moduli(m, th))) < 0.0) ++indefinite;
    EXPECT_GT(min_eigenvalue(effective_stiffness(chi, m, cfg)), 0.0);
    const auto dc = effective_stiffness_sensitivity(chi, m, cfg);
    for (int j = 0; j < 5; ++j) {
      const double h = 1e-7;
      Vector5d vp = chi.as_vector(), vm = chi.as_vector();
      vp[j] += h;
      vm[j] -= h;
      const Matrix6d cp = effective_stiffness(DesignParamsChi::from_vector(vp), m, cfg);
      const Matrix6d cm = effective_stiffness(DesignParamsChi::from_vector(vm), m, cfg);
      const Matrix6d c0 = effective_stiffness(chi, m, cfg);
      const Matrix6d fd = (cp - cm) / (2 * h);
      if (((cp - c0) / h - (c0 - cm) / h).norm() > 1e-3 * (1e-3 + fd.norm())) continue;
      EXPECT_LT((dc[j] - fd).norm() / std::max(fd.norm(), 1e-8), 1e-4) << "slot " << j;
      ++checked;
    }
  }
  EXPECT_GT(indefinite, 5);
  EXPECT_GT(checked, 60);
}

TEST(VoidGate, SmoothStep) {
  const DesignSpaceConfig cfg;
  double d = -1;
  EXPECT_EQ(void_gate(0.01, cfg, &d), 0.0);
  EXPECT_EQ(d, 0.0);
  EXPECT_EQ(void_gate(0.2, cfg, &d), 1.0);
  EXPECT_EQ(d, 0.0);
  EXPECT_NEAR(void_gate(0.05, cfg), 0.5, 1e-15);
  const double h = 1e-7;
  void_gate(0.04, cfg, &d);
  EXPECT_NEAR(d, (void_gate(0.04 + h, cfg) - void_gate(0.04 - h, cfg)) / (2 * h), 1e-6);
}

TEST(DesignParamsChi, BoxValidation) {
  EXPECT_THROW((DesignParamsChi{0.5, 0, 0, 0, 2.0}.validate()), DomainError);
  EXPECT_THROW((DesignParamsChi{-0.1, 0, 0, 0, 0}.validate()), DomainError);
  EXPECT_NO_THROW((DesignParamsChi{0.0, 0, 0, 0, -kPi / 2}.validate()));
}
