#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "spinodoid/types.hpp"
#include "spinodoid/voxel_grid.hpp"

namespace spinodoid {

inline constexpr double kRhoMin = 0.3;
inline constexpr double kThetaMin = kPi / 6.0;
inline constexpr int kDefaultWaveCount = 1000;
inline constexpr std::uint64_t kDirectionSamplingCap = 1'000'000;

// Spinodoid design parameters: relative density and cone half-angles (rad).
struct DesignParamsTheta {
  double rho = 0.5;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;

  std::array<double, 3> angles() const { return {theta1, theta2, theta3}; }

  // Checks the physical domain used by the generator: rho in [0, 1], every
  // angle in [0, pi/2], and at least one nonzero angle when rho > 0.
  void validate() const;

  // Additionally enforces rho in {0} U [rho_min, 1] and
  // theta_i in {0} U [theta_min, pi/2].
  bool is_admissible(double rho_min = kRhoMin, double theta_min = kThetaMin) const;
};

struct Wave {
  Vec3 direction;
  double phase = 0.0;
};

struct WaveSet {
  double beta = 0.0;
  std::vector<Wave> waves;

  std::size_t count() const { return waves.size(); }
  void validate() const;
};

// The anisotropic acceptance predicate
//   (|k.e1| > cos t1) XOR (|k.e2| > cos t2) XOR (|k.e3| > cos t3).
bool in_cone_set(const Vec3& k, double theta1, double theta2, double theta3);

// Rejection-sampled unit directions, uniform on the cone set above.
// Throws DomainError if all angles are zero and NumericalError when a single
// direction needs more than kDirectionSamplingCap proposals.
std::vector<Vec3> sample_wave_directions(double theta1, double theta2, double theta3,
                                         int n_waves, std::uint64_t seed);

WaveSet build_wave_set(const DesignParamsTheta& params, double beta, int n_waves,
                       std::uint64_t seed);

// phi(x) = sqrt(2/N) sum_i cos(beta n_i . x + gamma_i).
double evaluate_grf(const WaveSet& waves, const Vec3& x);

// Standard normal quantile at rho: sqrt(2) erfinv(2 rho - 1).
double level_set_threshold(double rho);

// Rigid rotation of every wave direction by `alpha` about e3.
WaveSet rotate_about_e3(const WaveSet& waves, double alpha);

// Samples phi at every cell center of `grid`'s lattice; result is stored
// k-major like VoxelGrid::data.
std::vector<double> sample_grf_on_lattice(const WaveSet& waves, std::array<int, 3> dims,
                                          const Vec3& origin, const Vec3& spacing);

struct TopologyOptions {
  int n_waves = kDefaultWaveCount;
  double rve_length = 1.0;  // cubic RVE edge l; the lattice spans [0, l]^3
};

// Cell is solid iff phi(center) <= phi_0(rho). rho = 1 yields an all-solid
// grid and rho = 0 an empty one.
VoxelGrid generate_voxel_topology(const DesignParamsTheta& params, double beta,
                                  std::array<int, 3> resolution, std::uint64_t seed,
                                  const TopologyOptions& options = {});

}  // namespace spinodoid
