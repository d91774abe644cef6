#include <benchmark/benchmark.h>

#include <random>

#include "spinodoid/config.hpp"
#include "spinodoid/homogenizer.hpp"
#include "spinodoid/optimizer.hpp"
#include "spinodoid/resolver.hpp"
#include "spinodoid/spinodoid_gen.hpp"
#include "spinodoid/surrogate.hpp"

using namespace spinodoid;

namespace {

const DesignParamsTheta kIso{0.5, kPi / 2, kPi / 2, kPi / 2};

MlpModel random_surrogate() {
  MlpModel m;
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& layer : m.layers) {
    const double s = std::sqrt(2.0 / static_cast<double>(layer.a.cols()));
    for (Eigen::Index i = 0; i < layer.a.size(); ++i) layer.a.data()[i] = s * n(gen);
  }
  m.norm.in_hi = (Eigen::VectorXd(4) << 1.0, kPi / 2, kPi / 2, kPi / 2).finished();
  m.norm.out_mean = (Eigen::VectorXd(9) << 0.3, 0.1, 0.1, 0.3, 0.1, 0.3, 0.1, 0.1, 0.1).finished();
  m.norm.out_std = Eigen::VectorXd::Constant(9, 0.005);
  return m;
}

MacroConfig desk_cantilever() {
  MacroConfig m;
  m.supports.push_back({Box{Vec3::Zero(), Vec3(0, 1, 0.1)}, {true, true, true}, Vec3::Zero()});
  LoadCaseSpec lc;
  lc.name = "tip";
  lc.points.push_back({Vec3(1.5, 0.5, 0.05), Vec3(0, -0.02, 0)});
  m.load_cases.push_back(lc);
  return m;
}

}  // namespace

static void BM_GrfPoint(benchmark::State& state) {
  const WaveSet w = build_wave_set(kIso, 10 * kPi, static_cast<int>(state.range(0)), 1);
  Vec3 x(0.1, 0.2, 0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_grf(w, x));
    x.x() += 1e-3;
  }
}
BENCHMARK(BM_GrfPoint)->Arg(1000);

static void BM_Topology(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(generate_voxel_topology(kIso, 10 * kPi, {n, n, n}, 2));
}
BENCHMARK(BM_Topology)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_Homogenize(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const VoxelGrid g = generate_voxel_topology(kIso, 10 * kPi, {n, n, n}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(homogenize(g, {1.0, 0.3}));
}
BENCHMARK(BM_Homogenize)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_SurrogateBatchJacobian(benchmark::State& state) {
  const MlpModel m = random_surrogate();
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(4, state.range(0), 0.6);
  Eigen::MatrixXd y;
  std::vector<Eigen::MatrixXd> jac;
  for (auto _ : state) m.forward_batch_with_jacobian(x, &y, &jac);
}
BENCHMARK(BM_SurrogateBatchJacobian)->Arg(3072)->Unit(benchmark::kMillisecond);

static void BM_DeskSensitivity(benchmark::State& state) {
  const MacroFem fem(build_macro_problem(desk_cantilever()));
  const MlpModel m = random_surrogate();
  const ElementField field(fem.element_count(), DesignParamsChi{0.5, 0.8, 0.8, 0.8, 0.1});
  for (auto _ : state) benchmark::DoNotOptimize(design_sensitivity(fem, field, m, DesignSpaceConfig{}));
}
BENCHMARK(BM_DeskSensitivity)->Unit(benchmark::kMillisecond);

static void BM_ResolveSlab(benchmark::State& state) {
  const TetMesh mesh = build_macro_mesh(desk_cantilever());
  const ElementField field(mesh.element_count(), DesignParamsChi{0.5, 1.2, 1.2, 1.2, 0.3});
  ResolveConfig cfg;
  cfg.resolution = {64, 64, 1};
  const Box region{Vec3(0.2, 0.2, 0.04), Vec3(0.3, 0.3, 0.06)};
  const GradedStructure s(mesh, field, cfg, region);
  const VoxelGrid lattice = resolve_lattice(mesh, cfg, region);
  std::vector<std::uint8_t> out(64 * 64);
  for (auto _ : state) s.sample_slab(lattice, 0, out.data(), 1);
  state.SetItemsProcessed(state.iterations() * 64 * 64);
}
BENCHMARK(BM_ResolveSlab)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
