#include <gtest/gtest.h>

#include <Eigen/LU>
#include <filesystem>
#include <fstream>

#include "spinodoid/dataset.hpp"
#include "spinodoid/elasticity.hpp"
#include "spinodoid/errors.hpp"
#include "spinodoid/homogenizer.hpp"
#include "test_models.hpp"

using namespace spinodoid;
using spinodoid::testing::isotropic_matrix;
using spinodoid::testing::isotropic_nine;

namespace {

VoxelGrid solid_cube(int n) {
  VoxelGrid g({n, n, n}, Vec3::Zero(), Vec3::Constant(1.0 / n));
  std::fill(g.data.begin(), g.data.end(), 1);
  return g;
}

}  // namespace

TEST(BaseMaterial, LameValues) {
  const Matrix6d c = base_material_stiffness({1.0, 0.3});
  EXPECT_NEAR(c(0, 0), 1.3461538461538463, 1e-12);
  EXPECT_NEAR(c(0, 1), 0.5769230769230769, 1e-12);
  EXPECT_NEAR(c(5, 5), 0.38461538461538464, 1e-12);
  EXPECT_TRUE(base_material_stiffness({2.0, 0.3}).isApprox(2.0 * c, 1e-15));
  const Matrix6d c0 = base_material_stiffness({1.0, 0.0});
  EXPECT_EQ(c0(0, 1), 0.0);
  EXPECT_NEAR(c0(0, 0), 1.0, 1e-15);
}

TEST(BaseMaterial, RejectsInvalidPoisson) {
  EXPECT_THROW(base_material_stiffness({1.0, 0.5}), ConfigError);
  EXPECT_THROW(base_material_stiffness({-1.0, 0.3}), ConfigError);
}

TEST(Hex8, RigidModesAndPatch) {
  const double h = 0.25;
  const auto k = hex8_stiffness(isotropic_matrix(1.0, 0.3), h);
  EXPECT_LT((k - k.transpose()).norm(), 1e-12 * k.norm());
  Eigen::Matrix<double, 24, 1> t;
  for (int a = 0; a < 8; ++a) t.segment<3>(3 * a) = Vec3(0.3, -0.2, 0.1);
  EXPECT_LT((k * t).norm(), 1e-12);
  // Infinitesimal rotation about e3: u = (-y, x, 0).
  Eigen::Matrix<double, 24, 1> r;
  for (int a = 0; a < 8; ++a) {
    const Vec3 x = h * Vec3(a & 1, (a >> 1) & 1, (a >> 2) & 1);
    r.segment<3>(3 * a) = Vec3(-x.y(), x.x(), 0.0);
  }
  EXPECT_LT((k * r).norm(), 1e-12);
  // Mean strain of a uniform stretch.
  Eigen::Matrix<double, 24, 1> s;
  for (int a = 0; a < 8; ++a) s.segment<3>(3 * a) = Vec3(0.01 * h * (a & 1), 0, 0);
  const Vector6d eps = hex8_mean_strain_matrix(h) * s;
  EXPECT_NEAR(eps[0], 0.01, 1e-15);
  EXPECT_NEAR(eps.tail<5>().norm(), 0.0, 1e-15);
}

TEST(Homogenize, AllSolidReproducesBaseMaterial) {
  const HomogenizeResult r = homogenize(solid_cube(6), {1.0, 0.3});
  const Matrix6d c = isotropic_matrix(1.0, 0.3);
  EXPECT_LT((r.stiffness - c).norm() / c.norm(), 1e-6);
  EXPECT_DOUBLE_EQ(r.solid_fraction, 1.0);
  EXPECT_EQ(r.islands_removed, 0);
}

TEST(Homogenize, PcgAgreesWithCholesky) {
  const VoxelGrid g = generate_voxel_topology({0.6, kPi / 2, kPi / 2, kPi / 2}, 10 * kPi, {12, 12, 12}, 3);
  HomogenizeOptions pcg;
  pcg.solver.kind = SolverKind::kPcg;
  pcg.solver.relative_tolerance = 1e-10;
  const Matrix6d a = homogenize(g, {1.0, 0.3}).stiffness;
  const Matrix6d b = homogenize(g, {1.0, 0.3}, pcg).stiffness;
  EXPECT_LT((a - b).norm() / a.norm(), 1e-7);
}

TEST(Homogenize, LinearInYoungsModulus) {
  const VoxelGrid g = generate_voxel_topology({0.5, kPi / 2, kPi / 2, kPi / 2}, 10 * kPi, {12, 12, 12}, 9);
  const Matrix6d a = homogenize(g, {1.0, 0.3}).stiffness;
  const Matrix6d b = homogenize(g, {2.0, 0.3}).stiffness;
  EXPECT_LT((b - 2.0 * a).norm() / b.norm(), 1e-9);
}

TEST(Homogenize, BelowVoigtBoundAndSymmetric) {
  const VoxelGrid g = generate_voxel_topology({0.5, kPi / 2, kPi / 2, kPi / 2}, 10 * kPi, {16, 16, 16}, 12);
  const HomogenizeResult r = homogenize(g, {1.0, 0.3});
  const Matrix6d gap = r.kept_fraction * isotropic_matrix(1.0, 0.3) - r.stiffness;
  EXPECT_GE(min_eigenvalue(gap), -1e-6);
  EXPECT_LT(r.raw_asymmetry, 1e-6 * r.stiffness.norm());
  EXPECT_GT(min_eigenvalue(r.stiffness), 0.0);
}

TEST(Homogenize, EmptyGridIsZero) {
  VoxelGrid g({4, 4, 4}, Vec3::Zero(), Vec3::Constant(0.25));
  EXPECT_EQ(homogenize(g, {1.0, 0.3}).stiffness.norm(), 0.0);
}

TEST(Islands, FloatingComponentRemoved) {
  VoxelGrid g({6, 6, 6}, Vec3::Zero(), Vec3::Constant(1.0 / 6));
  g(2, 2, 2) = 1;  // floating
  for (int i = 0; i < 6; ++i) g(i, 0, 0) = 1;  // touches the boundary
  int removed = 0;
  const VoxelGrid out = remove_floating_islands(g, &removed);
  EXPECT_EQ(removed, 1);
  EXPECT_EQ(out(2, 2, 2), 0);
  EXPECT_EQ(out.solid_count(), 6u);
}

TEST(Orthotropic, IsotropicSplit) {
  const OrthotropicSplit s = extract_orthotropic(isotropic_matrix(1.0, 0.3));
  EXPECT_LT((s.moduli - isotropic_nine(1.0, 0.3)).norm(), 1e-14);
  EXPECT_EQ(s.remainder_norm, 0.0);
  EXPECT_EQ(extract_orthotropic(Matrix6d::Zero()).moduli.norm(), 0.0);
  EXPECT_TRUE(expand_orthotropic(s.moduli).isApprox(isotropic_matrix(1.0, 0.3), 1e-15));
}

TEST(Orthotropic, RemainderOfCoupling) {
  Matrix6d c = isotropic_matrix(1.0, 0.3);
  c(0, 3) = c(3, 0) = 0.1;
  EXPECT_NEAR(extract_orthotropic(c).remainder_norm, std::sqrt(0.02), 1e-14);
}

TEST(YoungsSurface, IsotropicIsConstant) {
  const Matrix6d c = isotropic_matrix(1.0, 0.3);
  for (const Vec3& d : sphere_directions(50)) EXPECT_NEAR(youngs_modulus(c, d), 1.0, 1e-12);
}

TEST(YoungsSurface, AxisValueIsInverseCompliance) {
  Matrix6d c = isotropic_matrix(1.0, 0.3);
  c(0, 0) = 3.0;
  c(4, 4) = 0.7;
  const Matrix6d s = c.inverse();
  EXPECT_NEAR(youngs_modulus(c, Vec3::UnitX()), 1.0 / s(0, 0), 1e-12);
  EXPECT_THROW(youngs_modulus(Matrix6d::Zero(), Vec3::UnitX()), NumericalError);
}

TEST(YoungsSurface, FibonacciDirectionsAreUnit) {
  const auto d = sphere_directions(500);
  ASSERT_EQ(d.size(), 500u);
  Vec3 m = Vec3::Zero();
  for (const auto& v : d) {
    EXPECT_NEAR(v.norm(), 1.0, 1e-14);
    m += v;
  }
  EXPECT_LT(m.norm() / 500.0, 0.01);
}

TEST(Dataset, RowParametersArePureAndAdmissible) {
  const SamplingPlan plan;
  for (long i = 0; i < 50; ++i) {
    const DatasetRow a = sample_row_parameters(plan, 42, i);
    const DatasetRow b = sample_row_parameters(plan, 42, i);
    EXPECT_EQ(a.rho, b.rho);
    EXPECT_EQ(a.theta_deg, b.theta_deg);
    EXPECT_GE(a.rho, 0.3);
    EXPECT_LE(a.rho, 1.0);
    int nonzero = 0;
    for (double t : a.theta_deg) {
      EXPECT_TRUE(t == 0.0 || (t >= 30.0 && t <= 90.0));
      nonzero += t != 0.0;
    }
    EXPECT_GT(nonzero, 0);
  }
}

TEST(Dataset, CountZeroWritesHeaderOnly) {
  const auto dir = std::filesystem::temp_directory_path() / "spinodoid_ds_zero";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  DatasetSpec spec;
  spec.resolution = 8;
  const auto path = dir / "d.csv";
  const DatasetReport r = generate_dataset(spec, 0, path, ExistingOutput::kRefuse, 1, Json::object());
  EXPECT_EQ(r.rows, 0);
  std::ifstream in(path);
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, dataset_csv_header());
  EXPECT_FALSE(std::getline(in, line));
  EXPECT_THROW(generate_dataset(spec, 0, path, ExistingOutput::kRefuse, 1, Json::object()), ConfigError);
}

TEST(Dataset, ResumeMatchesUninterruptedRun) {
  const auto dir = std::filesystem::temp_directory_path() / "spinodoid_ds_resume";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  DatasetSpec spec;
  spec.resolution = 8;
  spec.n_waves = 200;
  spec.seed = 5;
  generate_dataset(spec, 4, dir / "full.csv", ExistingOutput::kRefuse, 1, Json::object());
  generate_dataset(spec, 2, dir / "part.csv", ExistingOutput::kRefuse, 1, Json::object());
  {
    // Simulate a crash mid-row.
    std::ofstream out(dir / "part.csv", std::ios::app);
    out << "2,0.5,3";
  }
  const DatasetReport r = generate_dataset(spec, 4, dir / "part.csv", ExistingOutput::kResume, 2, Json::object());
  EXPECT_TRUE(r.resumed);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir / "full.csv"), slurp(dir / "part.csv"));
  DatasetSpec other = spec;
  other.beta *= 2;
  EXPECT_THROW(generate_dataset(other, 5, dir / "part.csv", ExistingOutput::kResume, 1, Json::object()),
               ConfigError);
}

TEST(Dataset, CsvParseErrorsNameLocation) {
  const auto path = std::filesystem::temp_directory_path() / "spinodoid_bad.csv";
  {
    std::ofstream out(path);
    out << dataset_csv_header() << "\n0,0.5,abc\n";
  }
  try {
    read_dataset_csv(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}
