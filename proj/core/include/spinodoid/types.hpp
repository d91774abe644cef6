#pragma once

#include <Eigen/Core>

namespace spinodoid {

using Vec3 = Eigen::Vector3d;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Vector9d = Eigen::Matrix<double, 9, 1>;
using Vector4d = Eigen::Vector4d;
using Matrix94d = Eigen::Matrix<double, 9, 4>;

// 6x6 effective elasticity matrix, Voigt order (11, 22, 33, 23, 31, 12) with
// engineering shear strains.
using VoigtStiffness = Matrix6d;

// (C1111, C1122, C1133, C2222, C2233, C3333, C2323, C3131, C1212).
using OrthotropicNine = Vector9d;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace spinodoid
