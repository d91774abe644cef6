#include "spinodoid/elasticity.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "spinodoid/errors.hpp"

namespace spinodoid {

namespace {

// Voigt (row, col) for each of the nine orthotropic moduli.
constexpr std::array<std::pair<int, int>, 9> kOrthoSlots{{
    {0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}, {3, 3}, {4, 4}, {5, 5}}};

}  // namespace

void BaseMaterial::validate() const {
  if (!(youngs_modulus > 0.0)) throw DomainError("base material: Young's modulus must be positive");
  if (poisson_ratio == 0.5) {
    throw DomainError("base material: nu = 0.5 is incompressible; Lame lambda is unbounded");
  }
  if (!(poisson_ratio > -1.0 && poisson_ratio < 0.5)) {
    throw DomainError("base material: Poisson's ratio must lie in (-1, 0.5), got " +
                      std::to_string(poisson_ratio));
  }
}

VoigtStiffness base_material_stiffness(const BaseMaterial& mat) {
  mat.validate();
  const double e = mat.youngs_modulus;
  const double nu = mat.poisson_ratio;
  const double lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = e / (2.0 * (1.0 + nu));
  VoigtStiffness c = VoigtStiffness::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) c(i, j) = lambda;
    c(i, i) = lambda + 2.0 * mu;
    c(i + 3, i + 3) = mu;
  }
  return c;
}

OrthotropicSplit extract_orthotropic(const VoigtStiffness& c) {
  OrthotropicSplit out;
  VoigtStiffness rest = c;
  for (int k = 0; k < 9; ++k) {
    const auto [r, q] = kOrthoSlots[k];
    out.moduli[k] = c(r, q);
    rest(r, q) = 0.0;
    rest(q, r) = 0.0;
  }
  out.remainder_norm = rest.norm();
  return out;
}

VoigtStiffness expand_orthotropic(const OrthotropicNine& s) {
  VoigtStiffness c = VoigtStiffness::Zero();
  for (int k = 0; k < 9; ++k) {
    const auto [r, q] = kOrthoSlots[k];
    c(r, q) = s[k];
    c(q, r) = s[k];
  }
  return c;
}

VoigtStiffness orthotropic_basis(int k) {
  OrthotropicNine e = OrthotropicNine::Zero();
  e[k] = 1.0;
  return expand_orthotropic(e);
}

double youngs_modulus(const VoigtStiffness& c, const Vec3& d) {
  Eigen::FullPivLU<Matrix6d> lu(c);
  if (!lu.isInvertible()) throw NumericalError("youngs_modulus: stiffness matrix is singular");
  const Matrix6d s = lu.inverse();  // engineering-shear Voigt compliance
  const Vec3 n = d.normalized();
  // Uniaxial unit stress along n in Voigt form; the engineering compliance
  // already carries the tensor factors of 2 and 4.
  Vector6d sigma;
  sigma << n.x() * n.x(), n.y() * n.y(), n.z() * n.z(), n.y() * n.z(), n.z() * n.x(),
      n.x() * n.y();
  const double inv_e = sigma.dot(s * sigma);
  if (!(inv_e > 0.0)) throw NumericalError("youngs_modulus: non-positive directional compliance");
  return 1.0 / inv_e;
}

std::vector<Vec3> sphere_directions(int count) {
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

double asymmetry_norm(const VoigtStiffness& c) { return (c - c.transpose()).norm(); }

double min_eigenvalue(const VoigtStiffness& c) {
  Eigen::SelfAdjointEigenSolver<Matrix6d> eig(0.5 * (c + c.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()[0];
}

}  // namespace spinodoid
