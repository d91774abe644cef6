#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <filesystem>
#include <random>

#include "spinodoid/elasticity.hpp"
#include "spinodoid/errors.hpp"
#include "spinodoid/resolver.hpp"
#include "spinodoid/rng.hpp"
#include "spinodoid/vtk_io.hpp"

using namespace spinodoid;

namespace {

TetMesh single_tet() {
  TetMesh m;
  m.nodes = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  m.tets = {{0, 1, 2, 3}};
  return m;
}

ResolveConfig small_config() {
  ResolveConfig cfg;
  cfg.beta = 20 * kPi;
  cfg.n_waves = 200;
  cfg.resolution = {24, 24, 24};
  cfg.seed = 17;
  return cfg;
}

const DesignParamsChi kIsotropicHalf{0.5, kPi / 2, kPi / 2, kPi / 2, 0.0};

}  // namespace

TEST(PartitionWeights, SumToOne) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Vec3> c;
  for (int i = 0; i < 50; ++i) c.emplace_back(u(gen), u(gen), u(gen));
  for (double kappa : {1.0, 100.0, 1e6}) {
    for (int t = 0; t < 20; ++t) {
      const auto q = partition_weights(Vec3(u(gen), u(gen), u(gen)), c, kappa);
      double s = 0.0;
      for (double v : q) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(PartitionWeights, EquidistantIsHalfHalf) {
  const std::vector<Vec3> c{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const auto q = partition_weights(Vec3(0.5, 0.3, -0.2), c, 50.0);
  EXPECT_NEAR(q[0], 0.5, 1e-15);
  EXPECT_NEAR(q[1], 0.5, 1e-15);
  const auto far = partition_weights(Vec3(30, 0, 0), c, 1e4);
  EXPECT_EQ(far[1], 1.0);
}

TEST(Spacing, RegularGrid) {
  std::vector<Vec3> c;
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 5; ++i) c.emplace_back(0.2 * i, 0.2 * j, 0.2 * k);
  EXPECT_NEAR(mean_nearest_spacing(c), 0.2, 1e-12);
}

TEST(GradedStructure, DefaultKappa) {
  const TetMesh m = structured_box_mesh(Vec3(1, 1, 1), {2, 2, 2});
  const GradedStructure s(m, ElementField(m.element_count(), kIsotropicHalf), small_config());
  EXPECT_NEAR(s.kappa(), std::log(1e4) / (s.spacing() * s.spacing()), 1e-9);
}

TEST(GradedStructure, WeightsArePrunedAndNormalized) {
  const TetMesh m = structured_box_mesh(Vec3(1, 1, 1), {3, 3, 3});
  ResolveConfig cfg = small_config();
  const GradedStructure s(m, ElementField(m.element_count(), kIsotropicHalf), cfg);
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    const Vec3 x(u(gen), u(gen), u(gen));
    const auto w = s.weights(x);
    double sum = 0.0;
    for (const auto& [e, q] : w) {
      sum += q;
      EXPECT_GE(q, cfg.q_min * 0.999);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    // Dominant weight belongs to the nearest centroid.
    const auto full = partition_weights(x, s.centroids(), s.kappa());
    const auto best = std::max_element(w.begin(), w.end(), [](auto& a, auto& b) { return a.second < b.second; });
    EXPECT_EQ(best->first, std::max_element(full.begin(), full.end()) - full.begin());
  }
}

TEST(GradedStructure, SingleElementIsItsOwnLevelSet) {
  const TetMesh m = single_tet();
  const DesignParamsChi chi{0.7, kPi / 2, kPi / 3, kPi / 4, 0.4};
  ResolveConfig cfg = small_config();
  const GradedStructure s(m, {chi}, cfg);
  const TransformConfig t;
  const Vector4d th = transform_f(chi.theta(), t);
  const WaveSet direct = rotate_about_e3(
      build_wave_set({th[0], th[1], th[2], th[3]}, cfg.beta, cfg.n_waves, derive_seed(cfg.seed, 0)), -chi.alpha);
  const double phi0 = level_set_threshold(th[0]);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 0.33);
  for (int i = 0; i < 50; ++i) {
    const Vec3 x(u(gen), u(gen), u(gen));
    EXPECT_NEAR(s.interpolated_grf(x), evaluate_grf(direct, x) - phi0, 1e-12);
    EXPECT_EQ(s.solid(x), evaluate_grf(direct, x) - phi0 <= 0.0);
  }
  EXPECT_FALSE(s.solid(Vec3(0.6, 0.6, 0.6)));  // outside the tetrahedron
}

TEST(GradedStructure, SharedSeedUniformFieldIsOneGrf) {
  const TetMesh m = structured_box_mesh(Vec3(1, 1, 1), {3, 3, 3});
  ResolveConfig cfg = small_config();
  cfg.seed_policy = SeedPolicy::kShared;
  const GradedStructure s(m, ElementField(m.element_count(), kIsotropicHalf), cfg);
  const Vector4d th = transform_f(kIsotropicHalf.theta(), TransformConfig{});
  const WaveSet w = build_wave_set({th[0], th[1], th[2], th[3]}, cfg.beta, cfg.n_waves, cfg.seed);
  const double phi0 = level_set_threshold(th[0]);
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 50; ++i) {
    const Vec3 x(u(gen), u(gen), u(gen));
    EXPECT_NEAR(s.interpolated_grf(x), evaluate_grf(w, x) - phi0, 1e-11);
  }
}

TEST(GradedStructure, RotationMatchesStiffnessTransform) {
  // Lamellar element: waves within 15 deg of e1, turned by alpha.
  const double alpha = deg2rad(30.0);
  const DesignParamsChi chi{0.6, deg2rad(15.0), 0.0, 0.0, alpha};
  ResolveConfig cfg = small_config();
  cfg.n_waves = 2000;
  cfg.transform.theta_min = deg2rad(10.0);
  const GradedStructure s(single_tet(), {chi}, cfg);
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  for (const auto& w : s.waves(0).waves) m += w.direction * w.direction.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(m);
  const Vec3 axis = eig.eigenvectors().col(2);
  // Strongly anisotropic stiffness with its soft axis along e1.
  OrthotropicNine nine;
  nine << 0.2, 0.05, 0.05, 1.0, 0.3, 1.0, 0.35, 0.1, 0.1;
  const Matrix6d c = expand_orthotropic(nine);
  const Matrix6d t = rotation_matrix_voigt(alpha);
  const Matrix6d rotated = t * c * t.transpose();
  EXPECT_NEAR(youngs_modulus(rotated, axis) / youngs_modulus(c, Vec3::UnitX()), 1.0, 0.02);
  const Vec3 mirrored(axis.x(), -axis.y(), axis.z());
  EXPECT_GT(youngs_modulus(rotated, mirrored) / youngs_modulus(c, Vec3::UnitX()), 1.5);
}

TEST(GradedStructure, AllZeroAnglesRejected) {
  EXPECT_THROW(GradedStructure(single_tet(), {DesignParamsChi{0.6, 0.0, 0.0, 0.0, 0.0}}, small_config()), DomainError);
  EXPECT_THROW(GradedStructure(single_tet(), {kIsotropicHalf, kIsotropicHalf}, small_config()), ConfigError);
}

TEST(Resolve, AllVoidIsEmpty) {
  const TetMesh m = structured_box_mesh(Vec3(1, 1, 1), {2, 2, 2});
  ElementField f(m.element_count(), kIsotropicHalf);
  for (auto& chi : f) chi.rho = 0.0;
  ResolveStats stats;
  const VoxelGrid g = resolve_structure(m, f, small_config(), std::nullopt, &stats);
  EXPECT_EQ(g.solid_count(), 0u);
  EXPECT_EQ(stats.solid_voxels, 0u);
}

TEST(Resolve, UniformHalfDensityFillsHalf) {
  const TetMesh m = structured_box_mesh(Vec3(1, 1, 1), {3, 3, 3});
  ResolveConfig cfg = small_config();
  cfg.resolution = {48, 48, 48};
  ResolveStats stats;
  resolve_structure(m, ElementField(m.element_count(), kIsotropicHalf), cfg, std::nullopt, &stats);
  EXPECT_NEAR(stats.solid_fraction(), 0.5, 0.05);
  EXPECT_NEAR(mean_field_density(m, ElementField(m.element_count(), kIsotropicHalf), TransformConfig{}), 0.5, 1e-12);
}

TEST(Resolve, VoidSideStaysEmpty) {
  const TetMesh m = structured_box_mesh(Vec3(2, 1, 1), {4, 2, 2});
  ElementField f(m.element_count(), kIsotropicHalf);
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    if (m.centroid(e).x() > 1.0) f[e].rho = 0.0;
  }
  ResolveConfig cfg = small_config();
  cfg.resolution = {40, 20, 20};
  const VoxelGrid g = resolve_structure(m, f, cfg);
  std::size_t right = 0, left = 0;
  for (int k = 0; k < 20; ++k)
    for (int j = 0; j < 20; ++j)
      for (int i = 0; i < 40; ++i) (i >= 25 ? right : left) += g(i, j, k);
  EXPECT_EQ(right, 0u);
  EXPECT_GT(left, 0u);
}

TEST(Resolve, BudgetGuard) {
  const TetMesh m = structured_box_mesh(Vec3(1, 1, 1), {1, 1, 1});
  ResolveConfig cfg = small_config();
  cfg.voxel_budget = 1000;
  EXPECT_THROW(resolve_structure(m, ElementField(6, kIsotropicHalf), cfg), ConfigError);
}

TEST(Resolve, StreamedVtkMatchesInMemory) {
  const TetMesh m = structured_box_mesh(Vec3(1, 1, 0.5), {2, 2, 1});
  ElementField f(m.element_count(), kIsotropicHalf);
  f[3].rho = 0.8;
  f[5].alpha = 0.7;
  ResolveConfig cfg = small_config();
  cfg.resolution = {20, 20, 10};
  const Box region{Vec3(0.1, 0.1, 0.0), Vec3(0.9, 0.6, 0.5)};
  const VoxelGrid mem = resolve_structure(m, f, cfg, region);
  const auto dir = std::filesystem::temp_directory_path();
  for (bool binary : {false, true}) {
    const auto path = dir / (binary ? "spinodoid_resolved_b.vtk" : "spinodoid_resolved_a.vtk");
    cfg.workers = binary ? 2 : 1;
    const ResolveStats st = resolve_to_vtk(m, f, cfg, region, path, binary);
    const VoxelGrid back = read_vtk_structured_points(path);
    EXPECT_EQ(back.dims, mem.dims);
    EXPECT_EQ(back.data, mem.data);
    EXPECT_LT((back.origin - region.lo).norm(), 1e-9);
    EXPECT_EQ(st.solid_voxels, mem.solid_count());
  }
}

TEST(Resolve, RegionRestrictionMatchesFullPreparation) {
  const TetMesh m = structured_box_mesh(Vec3(2, 1, 0.5), {8, 4, 2});
  ElementField f(m.element_count(), kIsotropicHalf);
  for (std::size_t e = 0; e < f.size(); ++e) f[e].rho = 0.35 + 0.5 * (e % 7) / 7.0;
  ResolveConfig cfg = small_config();
  const Box region{Vec3(0.2, 0.2, 0.1), Vec3(0.6, 0.5, 0.4)};
  const GradedStructure full(m, f, cfg);
  const GradedStructure part(m, f, cfg, region);
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x = region.lo + (region.hi - region.lo).cwiseProduct(Vec3(u(gen), u(gen), u(gen)));
    EXPECT_EQ(full.interpolated_grf(x), part.interpolated_grf(x));
  }
}

TEST(ResolveConfigValidation, Rejects) {
  ResolveConfig cfg;
  cfg.q_min = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(parse_seed_policy("random"), ConfigError);
  EXPECT_EQ(parse_seed_policy("shared"), SeedPolicy::kShared);
}
