#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "spinodoid/config.hpp"
#include "spinodoid/errors.hpp"
#include "spinodoid/macro_fem.hpp"
#include "spinodoid/optimizer.hpp"
#include "test_models.hpp"

using namespace spinodoid;
using spinodoid::testing::isotropic_matrix;

namespace {

MacroConfig cantilever(Vec3 size, std::array<int, 3> div, Vec3 tip_force) {
  MacroConfig m;
  m.size = size;
  m.divisions = div;
  m.supports.push_back({Box{Vec3::Zero(), Vec3(0, size.y(), size.z())}, {true, true, true}, Vec3::Zero()});
  LoadCaseSpec lc;
  lc.name = "tip";
  lc.boxes.push_back({Box{Vec3(size.x(), 0, 0), size}, tip_force});
  m.load_cases.push_back(lc);
  return m;
}

std::vector<VoigtStiffness> uniform(std::size_t n, const VoigtStiffness& c) { return std::vector<VoigtStiffness>(n, c); }

// Strain-displacement matrix from the inverse of the 4x4 coordinate matrix.
Matrix612 brute_force_b(const std::array<Vec3, 4>& x) {
  Eigen::Matrix4d m;
  for (int a = 0; a < 4; ++a) m.row(a) << 1.0, x[a].x(), x[a].y(), x[a].z();
  const Eigen::Matrix4d inv = m.inverse();  // column a holds the coefficients of N_a
  Matrix612 b = Matrix612::Zero();
  for (int a = 0; a < 4; ++a) {
    const double dx = inv(1, a), dy = inv(2, a), dz = inv(3, a);
    b(0, 3 * a) = dx;
    b(1, 3 * a + 1) = dy;
    b(2, 3 * a + 2) = dz;
    b(3, 3 * a + 1) = dz;
    b(3, 3 * a + 2) = dy;
    b(4, 3 * a) = dz;
    b(4, 3 * a + 2) = dx;
    b(5, 3 * a) = dy;
    b(5, 3 * a + 1) = dx;
  }
  return b;
}

}  // namespace

TEST(Mesh, CountsAndVolume) {
  const TetMesh unit = structured_box_mesh(Vec3(1, 1, 1), {1, 1, 1});
  EXPECT_EQ(unit.element_count(), 6u);
  EXPECT_NEAR(unit.total_volume(), 1.0, 1e-15);
  const TetMesh b1 = structured_box_mesh(Vec3(1.5, 1.0, 0.1), {64, 48, 2});
  EXPECT_EQ(b1.element_count(), 36864u);
  EXPECT_NEAR(b1.total_volume(), 0.15, 1e-12);
  for (std::size_t e = 0; e < b1.element_count(); e += 97) EXPECT_GT(b1.element_volume(e), 0.0);
}

TEST(Mesh, ExcludedCubesAndOrphans) {
  const TetMesh m = structured_box_mesh(Vec3(1, 1, 0.1), {2, 2, 1}, Vec3::Zero(),
                                        [](const Vec3& c) { return !(c.x() > 0.5 && c.y() > 0.5); });
  EXPECT_EQ(m.element_count(), 18u);
  EXPECT_NEAR(m.total_volume(), 0.075, 1e-15);
  EXPECT_EQ(m.node_count(), 16u);  // the far corner column is dropped
  EXPECT_NO_THROW(m.validate());
}

TEST(ElementStiffness, RigidModesAreStrainFree) {
  const std::array<Vec3, 4> x{Vec3(0, 0, 0), Vec3(1.2, 0.1, 0), Vec3(0.2, 0.9, 0.1), Vec3(0.1, 0.3, 1.1)};
  const Matrix12d k = element_stiffness(x, isotropic_matrix(1.0, 0.3));
  Eigen::Matrix<double, 12, 1> t, r;
  for (int a = 0; a < 4; ++a) {
    t.segment<3>(3 * a) = Vec3(0.3, -0.7, 0.2);
    r.segment<3>(3 * a) = Vec3(0.2, -0.5, 0.9).cross(x[a]);
  }
  EXPECT_LT((k * t).norm(), 1e-12);
  EXPECT_LT((k * r).norm(), 1e-10);
}

TEST(ElementStiffness, MatchesBruteForceOracle) {
  const std::array<Vec3, 4> x{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  const Matrix6d c = isotropic_matrix(1.0, 0.3);
  const Matrix612 b = brute_force_b(x);
  const Matrix12d expected = (1.0 / 6.0) * b.transpose() * c * b;
  EXPECT_LT((element_stiffness(x, c) - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ElementStiffness, InvertedElementRejected) {
  const std::array<Vec3, 4> x{Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(1, 0, 0), Vec3(0, 0, 1)};
  EXPECT_THROW(tet_geometry(x), DomainError);
}

TEST(Solve, CantileverMatchesBeamTheory) {
  // Slender beam L/h = 10 with an end shear load.
  const double l = 2.0, h = 0.2, f = 1e-3;
  const MacroProblem p = build_macro_problem(cantilever(Vec3(l, h, h), {60, 6, 6}, Vec3(0, -f, 0)));
  const MacroFem fem(p);
  const SolveResult r = fem.solve(uniform(fem.element_count(), isotropic_matrix(1.0, 0.3)));
  double tip = 0.0;
  const auto tip_nodes = nodes_in_box(p.mesh, Box{Vec3(l, 0, 0), Vec3(l, h, h)});
  for (int n : tip_nodes) tip += r.u[0][3 * n + 1];
  tip /= tip_nodes.size();
  const double inertia = h * h * h * h / 12.0;
  const double euler = f * l * l * l / (3.0 * 1.0 * inertia);
  EXPECT_NEAR(-tip / euler, 1.0, 0.15);
}

TEST(Solve, LinearityDirichletAndEnergyIdentity) {
  MacroConfig cfg = cantilever(Vec3(1, 0.5, 0.2), {6, 3, 2}, Vec3(0, -0.01, 0.002));
  const MacroProblem p = build_macro_problem(cfg);
  cfg.load_cases[0].boxes[0].force *= 2.0;
  const MacroProblem p2 = build_macro_problem(cfg);
  const auto c = uniform(p.mesh.element_count(), isotropic_matrix(1.0, 0.3));
  const MacroFem fem(p), fem2(p2);
  const SolveResult a = fem.solve(c), b = fem2.solve(c);
  EXPECT_LT((b.u[0] - 2.0 * a.u[0]).norm(), 1e-10 * b.u[0].norm());
  for (const auto& d : p.dirichlet) EXPECT_EQ(a.u[0][3 * d.node + d.component], d.value);
  EXPECT_NEAR(fem.strain_energy_product(a, 0, c), a.compliance[0], 1e-8 * a.compliance[0]);
  EXPECT_NEAR(a.compliance[0], a.u[0].dot(p.force_vector(0)), 1e-14);
}

TEST(Solve, PrescribedDisplacementIsExact) {
  MacroConfig cfg = cantilever(Vec3(1, 0.5, 0.2), {4, 2, 2}, Vec3(0, 0, 0));
  cfg.load_cases[0].boxes.clear();
  cfg.load_cases[0].points.push_back({Vec3(0.5, 0.25, 0.1), Vec3::Zero()});
  cfg.supports.push_back({Box{Vec3(1, 0, 0), Vec3(1, 0.5, 0.2)}, {true, false, false}, Vec3(0.01, 0, 0)});
  const MacroProblem p = build_macro_problem(cfg);
  const MacroFem fem(p);
  const SolveResult r = fem.solve(uniform(p.mesh.element_count(), isotropic_matrix(1.0, 0.3)));
  for (int n : nodes_in_box(p.mesh, Box{Vec3(1, 0, 0), Vec3(1, 0.5, 0.2)})) EXPECT_EQ(r.u[0][3 * n], 0.01);
}

TEST(Solve, ZeroLoadZeroCompliance) {
  MacroConfig cfg = cantilever(Vec3(1, 0.5, 0.2), {3, 2, 1}, Vec3::Zero());
  cfg.load_cases[0].boxes.clear();
  cfg.load_cases[0].points.push_back({Vec3(1, 0.5, 0.2), Vec3::Zero()});
  const MacroFem fem(build_macro_problem(cfg));
  const SolveResult r = fem.solve(uniform(fem.element_count(), isotropic_matrix(1.0, 0.3)));
  EXPECT_EQ(compliance(r), 0.0);
  EXPECT_EQ(r.u[0].norm(), 0.0);
}

TEST(Solve, MultiLoadObjectiveIsSum) {
  MacroConfig cfg = cantilever(Vec3(1, 0.5, 0.2), {4, 2, 2}, Vec3(0, -0.01, 0));
  LoadCaseSpec up = cfg.load_cases[0];
  up.name = "up";
  up.boxes[0].force = Vec3(0, 0.02, 0);
  cfg.load_cases.push_back(up);
  const MacroFem fem(build_macro_problem(cfg));
  const SolveResult r = fem.solve(uniform(fem.element_count(), isotropic_matrix(1.0, 0.3)));
  ASSERT_EQ(r.compliance.size(), 2u);
  EXPECT_NEAR(r.compliance[1], 4.0 * r.compliance[0], 1e-10 * r.compliance[1]);
  EXPECT_DOUBLE_EQ(objective_multi_load(r), r.compliance[0] + r.compliance[1]);
  cfg.load_cases.pop_back();
  const MacroFem single(build_macro_problem(cfg));
  EXPECT_DOUBLE_EQ(objective_multi_load(single.solve(uniform(single.element_count(), isotropic_matrix(1, 0.3)))),
                   r.compliance[0]);
}

TEST(Sensitivity, FullChainMatchesFiniteDifferences) {
  const MacroProblem p = build_macro_problem(cantilever(Vec3(1, 1, 0.5), {2, 2, 1}, Vec3(0, -0.01, 0)));
  ASSERT_EQ(p.mesh.element_count(), 24u);
  const MacroFem fem(p);
  const MlpModel model = spinodoid::testing::random_model({4, 24, 24, 9}, 21, 0.004);
  const DesignSpaceConfig cfg;
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0, 1);
  ElementField field;
  for (int e = 0; e < 24; ++e) {
    field.push_back({0.4 + 0.5 * u(gen), deg2rad(35 + 50 * u(gen)), deg2rad(35 + 50 * u(gen)),
                     deg2rad(35 + 50 * u(gen)), (u(gen) - 0.5) * 2.0});
  }
  const Eigen::MatrixXd sens = design_sensitivity(fem, field, model, cfg);
  double worst = 0.0;
  for (int e = 0; e < 24; ++e) {
    for (int j = 0; j < 5; ++j) {
      const double h = 1e-6;
      ElementField fp = field, fm = field;
      Vector5d vp = fp[e].as_vector(), vm = fm[e].as_vector();
      vp[j] += h;
      vm[j] -= h;
      fp[e] = DesignParamsChi::from_vector(vp);
      fm[e] = DesignParamsChi::from_vector(vm);
      const double fd = (evaluate_compliance(fem, fp, model, cfg) - evaluate_compliance(fem, fm, model, cfg)) / (2 * h);
      const double scale = std::max(std::abs(fd), 1e-6 * sens.cwiseAbs().maxCoeff());
      worst = std::max(worst, std::abs(sens(e, j) - fd) / scale);
    }
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Sensitivity, UnloadedElementsHaveZeroRows) {
  MacroConfig cfg = cantilever(Vec3(2, 1, 0.5), {2, 1, 1}, Vec3::Zero());
  cfg.load_cases[0].boxes.clear();
  cfg.load_cases[0].points.push_back({Vec3(2, 1, 0.5), Vec3::Zero()});
  const MacroFem fem(build_macro_problem(cfg));
  const MlpModel model = spinodoid::testing::random_model({4, 8, 9}, 2, 0.004);
  const ElementField field(fem.element_count(), DesignParamsChi{0.5, 0.8, 0.8, 0.8, 0.1});
  EXPECT_EQ(design_sensitivity(fem, field, model, DesignSpaceConfig{}).norm(), 0.0);
}

TEST(Filter, ZeroRadiusAndConstantPreservation) {
  const TetMesh m = structured_box_mesh(Vec3(1, 1, 0.1), {8, 8, 1});
  std::vector<Vec3> c;
  for (std::size_t e = 0; e < m.element_count(); ++e) c.push_back(m.centroid(e));
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Eigen::MatrixXd vals(c.size(), 5), sens(c.size(), 5);
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    vals.data()[i] = u(gen);
    sens.data()[i] = u(gen) - 0.5;
  }
  EXPECT_EQ(filter_sensitivities(c, vals, sens, 0.0), sens);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(c.size(), 5, 0.7);
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(c.size(), 5, -2.0);
  EXPECT_LT((filter_sensitivities(c, ones, flat, 0.3) - flat).cwiseAbs().maxCoeff(), 1e-13);
  // A non-trivial radius smooths: the spread of a noisy field shrinks.
  const Eigen::MatrixXd f = filter_sensitivities(c, ones, sens, 0.3);
  EXPECT_LT(f.col(0).maxCoeff() - f.col(0).minCoeff(), sens.col(0).maxCoeff() - sens.col(0).minCoeff());
}

TEST(VolumeConstraint, SaturatedDensityAndUniformGradient) {
  const TetMesh m = structured_box_mesh(Vec3(1, 1, 0.1), {4, 4, 1});
  std::vector<double> vol;
  for (std::size_t e = 0; e < m.element_count(); ++e) vol.push_back(m.element_volume(e));
  const Eigen::VectorXd rho = Eigen::VectorXd::Constant(vol.size(), 0.5);
  const VolumeConstraint g = volume_constraint(vol, rho, 0.45, TransformConfig{});
  EXPECT_NEAR(g.value, 0.05, 1e-14);
  EXPECT_LT(g.gradient.maxCoeff() - g.gradient.minCoeff(), 1e-15);
  EXPECT_NEAR(g.gradient.sum(), 1.0, 1e-12);
}
