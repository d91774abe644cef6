#include "spinodoid/spinodoid_gen.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <complex>
#include <string>

#include "spinodoid/errors.hpp"
#include "spinodoid/rng.hpp"

namespace spinodoid {

namespace {

constexpr double kHalfPi = kPi / 2.0;
constexpr double kAngleSlack = 1e-12;

bool angle_in_range(double t) { return t >= 0.0 && t <= kHalfPi + kAngleSlack; }

Vec3 uniform_on_sphere(Rng& rng) {
  const double z = 2.0 * rng.uniform() - 1.0;
  const double phi = 2.0 * kPi * rng.uniform();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace

void DesignParamsTheta::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw DomainError("design parameters: rho must lie in [0, 1], got " + std::to_string(rho));
  }
  for (double t : angles()) {
    if (!angle_in_range(t)) {
      throw DomainError("design parameters: cone angles must lie in [0, pi/2], got " +
                        std::to_string(t));
    }
  }
  if (rho > 0.0 && theta1 == 0.0 && theta2 == 0.0 && theta3 == 0.0) {
    throw DomainError("design parameters: at least one cone angle must be nonzero");
  }
}

bool DesignParamsTheta::is_admissible(double rho_min, double theta_min) const {
  try {
    validate();
  } catch (const DomainError&) {
    return false;
  }
  if (rho != 0.0 && rho < rho_min) return false;
  for (double t : angles()) {
    if (t != 0.0 && t < theta_min) return false;
  }
  return true;
}

void WaveSet::validate() const {
  if (!(beta > 0.0)) throw DomainError("wave set: beta must be positive");
  if (waves.empty()) throw DomainError("wave set: at least one wave is required");
  for (const auto& w : waves) {
    if (std::abs(w.direction.norm() - 1.0) > 1e-12) {
      throw DomainError("wave set: wave direction is not a unit vector");
    }
    if (!(w.phase >= 0.0 && w.phase < 2.0 * kPi)) {
      throw DomainError("wave set: phase outside [0, 2pi)");
    }
  }
}

bool in_cone_set(const Vec3& k, double theta1, double theta2, double theta3) {
  const bool c1 = std::abs(k.x()) > std::cos(theta1);
  const bool c2 = std::abs(k.y()) > std::cos(theta2);
  const bool c3 = std::abs(k.z()) > std::cos(theta3);
  return c1 ^ c2 ^ c3;
}

std::vector<Vec3> sample_wave_directions(double theta1, double theta2, double theta3,
                                         int n_waves, std::uint64_t seed) {
  if (n_waves < 1) throw DomainError("sample_wave_directions: n_waves must be >= 1");
  if (!angle_in_range(theta1) || !angle_in_range(theta2) || !angle_in_range(theta3)) {
    throw DomainError("sample_wave_directions: cone angles must lie in [0, pi/2]");
  }
  if (theta1 == 0.0 && theta2 == 0.0 && theta3 == 0.0) {
    throw DomainError("sample_wave_directions: all cone angles are zero, admissible set is empty");
  }
  const double c1 = std::cos(theta1);
  const double c2 = std::cos(theta2);
  const double c3 = std::cos(theta3);

  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n_waves));
  for (int i = 0; i < n_waves; ++i) {
    std::uint64_t tries = 0;
    for (;;) {
      if (++tries > kDirectionSamplingCap) {
        throw NumericalError(
            "sample_wave_directions: rejection sampling exceeded " +
            std::to_string(kDirectionSamplingCap) +
            " proposals; the cone set is degenerate for these angles");
      }
      const Vec3 k = uniform_on_sphere(rng);
      const bool a = std::abs(k.x()) > c1;
      const bool b = std::abs(k.y()) > c2;
      const bool c = std::abs(k.z()) > c3;
      if (a ^ b ^ c) {
        out.push_back(k.normalized());
        break;
      }
    }
  }
  return out;
}

WaveSet build_wave_set(const DesignParamsTheta& params, double beta, int n_waves,
                       std::uint64_t seed) {
  params.validate();
  if (!(beta > 0.0)) throw DomainError("build_wave_set: beta must be positive");
  const auto dirs = sample_wave_directions(params.theta1, params.theta2, params.theta3, n_waves,
                                           derive_seed(seed, 0));
  Rng phase_rng(derive_seed(seed, 1));
  WaveSet set;
  set.beta = beta;
  set.waves.reserve(dirs.size());
  for (const auto& d : dirs) {
    set.waves.push_back({d, 2.0 * kPi * phase_rng.uniform()});
  }
  return set;
}

double evaluate_grf(const WaveSet& waves, const Vec3& x) {
  double sum = 0.0;
  for (const auto& w : waves.waves) {
    sum += std::cos(waves.beta * w.direction.dot(x) + w.phase);
  }
  return std::sqrt(2.0 / static_cast<double>(waves.count())) * sum;
}

double level_set_threshold(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw DomainError("level_set_threshold: rho must lie in (0, 1), got " + std::to_string(rho));
  }
  return std::sqrt(2.0) * boost::math::erf_inv(2.0 * rho - 1.0);
}

WaveSet rotate_about_e3(const WaveSet& waves, double alpha) {
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  WaveSet out = waves;
  for (auto& w : out.waves) {
    const Vec3 d = w.direction;
    w.direction = Vec3(c * d.x() - s * d.y(), s * d.x() + c * d.y(), d.z());
  }
  return out;
}

std::vector<double> sample_grf_on_lattice(const WaveSet& waves, std::array<int, 3> dims,
                                          const Vec3& origin, const Vec3& spacing) {
  // cos(beta n.x + gamma) = Re(e^{i gamma} X(x) Y(y) Z(z)) with per-axis
  // complex exponentials, so each lattice point costs two multiply-adds per
  // wave instead of a cosine.
  const std::size_t n = waves.count();
  const int nx = dims[0], ny = dims[1], nz = dims[2];
  auto axis_table = [&](int axis, int count) {
    std::vector<std::complex<double>> table(static_cast<std::size_t>(count) * n);
    for (int c = 0; c < count; ++c) {
      const double coord = origin[axis] + spacing[axis] * (c + 0.5);
      for (std::size_t i = 0; i < n; ++i) {
        table[c * n + i] = std::polar(1.0, waves.beta * waves.waves[i].direction[axis] * coord);
      }
    }
    return table;
  };
  const auto tx = axis_table(0, nx);
  const auto ty = axis_table(1, ny);
  const auto tz = axis_table(2, nz);
  std::vector<double> xr(tx.size()), xi(tx.size());
  for (std::size_t q = 0; q < tx.size(); ++q) {
    xr[q] = tx[q].real();
    xi[q] = tx[q].imag();
  }

  const double scale = std::sqrt(2.0 / static_cast<double>(n));
  std::vector<double> out(static_cast<std::size_t>(nx) * ny * nz);
  std::vector<double> wr(n), wi(n);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::complex<double> w =
            std::polar(1.0, waves.waves[i].phase) * ty[j * n + i] * tz[k * n + i];
        wr[i] = w.real();
        wi[i] = w.imag();
      }
      double* row = out.data() + static_cast<std::size_t>(nx) * (j + static_cast<std::size_t>(ny) * k);
      for (int ix = 0; ix < nx; ++ix) {
        const double* pr = xr.data() + ix * n;
        const double* pi = xi.data() + ix * n;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += wr[i] * pr[i] - wi[i] * pi[i];
        row[ix] = scale * acc;
      }
    }
  }
  return out;
}

VoxelGrid generate_voxel_topology(const DesignParamsTheta& params, double beta,
                                  std::array<int, 3> resolution, std::uint64_t seed,
                                  const TopologyOptions& options) {
  params.validate();
  for (int r : resolution) {
    if (r < 8) throw DomainError("generate_voxel_topology: resolution must be >= 8 per axis");
  }
  if (!(options.rve_length > 0.0)) throw DomainError("generate_voxel_topology: rve_length must be positive");

  const Vec3 spacing(options.rve_length / resolution[0], options.rve_length / resolution[1],
                     options.rve_length / resolution[2]);
  VoxelGrid grid(resolution, Vec3::Zero(), spacing);
  if (params.rho >= 1.0) {
    std::fill(grid.data.begin(), grid.data.end(), std::uint8_t{1});
    return grid;
  }
  if (params.rho <= 0.0) return grid;

  const WaveSet waves = build_wave_set(params, beta, options.n_waves, seed);
  const double phi0 = level_set_threshold(params.rho);
  const auto phi = sample_grf_on_lattice(waves, resolution, grid.origin, spacing);
  for (std::size_t q = 0; q < phi.size(); ++q) grid.data[q] = phi[q] <= phi0 ? 1 : 0;
  return grid;
}

}  // namespace spinodoid
