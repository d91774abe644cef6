#include "spinodoid/resolver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "spinodoid/errors.hpp"
#include "spinodoid/rng.hpp"
#include "spinodoid/vtk_io.hpp"

namespace spinodoid {

namespace {

constexpr double kVoidDensity = 1e-6;
constexpr double kAngleZero = 1e-9;

Box bounding_box(const std::vector<Vec3>& pts) {
  Box b{Vec3::Constant(std::numeric_limits<double>::infinity()),
        Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (const auto& p : pts) {
    b.lo = b.lo.cwiseMin(p);
    b.hi = b.hi.cwiseMax(p);
  }
  return b;
}

}  // namespace

void ResolveConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("resolver: beta must be positive");
  if (!(q_min > 0.0 && q_min < 1.0)) throw ConfigError("resolver: q_min must lie in (0, 1)");
  if (n_waves < 1) throw ConfigError("resolver: n_waves must be at least 1");
  for (int r : resolution) {
    if (r < 1) throw ConfigError("resolver: resolution must be positive");
  }
  if (!(min_support >= 0.0 && min_support <= 1.0)) throw ConfigError("resolver: min_support must lie in [0, 1]");
  if (voxel_budget == 0) throw ConfigError("resolver: voxel budget must be positive");
  transform.validate();
}

Json ResolveConfig::to_json() const {
  return Json{{"beta", beta},
              {"kappa", kappa},
              {"q_min", q_min},
              {"n_waves", n_waves},
              {"resolution", resolution},
              {"seed", seed},
              {"seed_policy", seed_policy == SeedPolicy::kShared ? "shared" : "per-element"},
              {"voxel_budget", voxel_budget},
              {"min_support", min_support}};
}

SeedPolicy parse_seed_policy(const std::string& name) {
  if (name == "per-element") return SeedPolicy::kPerElement;
  if (name == "shared") return SeedPolicy::kShared;
  throw ConfigError("unknown seed policy '" + name + "' (expected per-element or shared)");
}

std::vector<double> partition_weights(const Vec3& x, const std::vector<Vec3>& centers, double kappa) {
  if (centers.empty()) throw ConfigError("partition_weights: no centers");
  std::vector<double> d2(centers.size());
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < centers.size(); ++e) {
    d2[e] = (x - centers[e]).squaredNorm();
    dmin = std::min(dmin, d2[e]);
  }
  // Shifting by the nearest distance leaves q unchanged and avoids underflow.
  double z = 0.0;
  for (double& v : d2) {
    v = std::exp(-kappa * (v - dmin));
    z += v;
  }
  for (double& v : d2) v /= z;
  return d2;
}

double mean_nearest_spacing(const std::vector<Vec3>& centers) {
  if (centers.size() < 2) return 1.0;
  const Box b = bounding_box(centers);
  const Vec3 ext = (b.hi - b.lo).cwiseMax(1e-12);
  double cell = std::cbrt(ext.prod() / static_cast<double>(centers.size()));
  cell = std::max({cell, ext.maxCoeff() / 1000.0, 1e-12});
  using Key = std::array<int, 3>;
  auto key = [&](const Vec3& p) {
    const Eigen::Vector3i q = ((p - b.lo) / cell).array().floor().cast<int>();
    return Key{q.x(), q.y(), q.z()};
  };
  std::map<Key, std::vector<int>> buckets;
  for (std::size_t e = 0; e < centers.size(); ++e) buckets[key(centers[e])].push_back(static_cast<int>(e));
  const int max_ring = static_cast<int>(std::ceil(ext.maxCoeff() / cell)) + 1;
  double total = 0.0;
  for (std::size_t e = 0; e < centers.size(); ++e) {
    const Key k = key(centers[e]);
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r <= max_ring; ++r) {
      for (int dz = -r; dz <= r; ++dz)
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
            const auto it = buckets.find({k[0] + dx, k[1] + dy, k[2] + dz});
            if (it == buckets.end()) continue;
            for (int f : it->second) {
              if (f != static_cast<int>(e)) best = std::min(best, (centers[e] - centers[f]).norm());
            }
          }
      if (best <= r * cell) break;
    }
    total += best;
  }
  return total / static_cast<double>(centers.size());
}

GradedStructure::GradedStructure(const TetMesh& mesh, const ElementField& field, const ResolveConfig& cfg,
                                 const std::optional<Box>& region)
    : mesh_(&mesh), cfg_(cfg) {
  cfg_.validate();
  mesh.validate();
  const std::size_t n = mesh.element_count();
  if (field.size() != n) throw ConfigError("resolver: field size does not match the mesh");
  for (std::size_t e = 0; e < n; ++e) centroids_.push_back(mesh.centroid(e));
  spacing_ = mean_nearest_spacing(centroids_);
  kappa_ = cfg_.kappa > 0.0 ? cfg_.kappa : std::log(1e4) / (spacing_ * spacing_);
  cutoff_sq_ = std::log(1.0 / cfg_.q_min) / kappa_;

  const Box mb = bounding_box(mesh.nodes);
  lo_ = mb.lo;
  bucket_ = std::max(spacing_, 1e-12);
  for (std::size_t e = 0; e < n; ++e) centroid_buckets_[key(centroids_[e], bucket_)].push_back(static_cast<int>(e));
  max_ring_ = static_cast<int>(std::ceil((mb.hi - mb.lo).maxCoeff() / bucket_)) + 2;

  double max_diameter = 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    const auto x = mesh.element_nodes(e);
    Eigen::Matrix3d m;
    m << x[1] - x[0], x[2] - x[0], x[3] - x[0];
    tet_inv_.push_back(m.inverse());
    tet_origin_.push_back(x[0]);
    Box tb = bounding_box({x[0], x[1], x[2], x[3]});
    max_diameter = std::max(max_diameter, (tb.hi - tb.lo).norm());
    const Key a = key(tb.lo, bucket_), b = key(tb.hi, bucket_);
    for (int k = a[2]; k <= b[2]; ++k)
      for (int j = a[1]; j <= b[1]; ++j)
        for (int i = a[0]; i <= b[0]; ++i) tet_buckets_[{i, j, k}].push_back(static_cast<int>(e));
  }

  // Elements farther than this from the region cannot carry weight inside it.
  const double margin = 2.0 * max_diameter + std::sqrt(cutoff_sq_) + bucket_;
  phi0_.resize(n);
  waves_.resize(n);
  for (std::size_t e = 0; e < n; ++e) {
    const Vector4d t = transform_f(field[e].theta(), cfg_.transform);
    if (t[0] < kVoidDensity) continue;
    const double rho_t = std::clamp(t[0], 1e-9, 1.0 - 1e-9);
    phi0_[e] = level_set_threshold(rho_t);
    if (region) {
      const Vec3& c = centroids_[e];
      if (((c.array() < region->lo.array() - margin).any()) || ((c.array() > region->hi.array() + margin).any())) {
        continue;
      }
    }
    DesignParamsTheta p{rho_t, t[1] < kAngleZero ? 0.0 : t[1], t[2] < kAngleZero ? 0.0 : t[2],
                        t[3] < kAngleZero ? 0.0 : t[3]};
    if (p.theta1 == 0.0 && p.theta2 == 0.0 && p.theta3 == 0.0) {
      throw DomainError("resolver: element " + std::to_string(e) +
                        " is non-void but all transformed cone angles vanish");
    }
    const std::uint64_t seed = cfg_.seed_policy == SeedPolicy::kShared ? cfg_.seed : derive_seed(cfg_.seed, e);
    try {
      // T(alpha) transforms stiffness for a microstructure turned by -alpha about e3.
      waves_[e] = rotate_about_e3(build_wave_set(p, cfg_.beta, cfg_.n_waves, seed), -field[e].alpha);
    } catch (const Error& err) {
      throw NumericalError("resolver: element " + std::to_string(e) + ": " + err.what());
    }
  }
}

GradedStructure::Key GradedStructure::key(const Vec3& x, double cell) const {
  const Eigen::Vector3i q = ((x - lo_) / cell).array().floor().cast<int>();
  return {q.x(), q.y(), q.z()};
}

std::vector<std::pair<int, double>> GradedStructure::weights(const Vec3& x) const {
  const Key k = key(x, bucket_);
  auto visit_ring = [&](int r, auto&& fn) {
    for (int dz = -r; dz <= r; ++dz)
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
          const auto it = centroid_buckets_.find({k[0] + dx, k[1] + dy, k[2] + dz});
          if (it == centroid_buckets_.end()) continue;
          for (int e : it->second) fn(e);
        }
  };
  // Nearest centroid by expanding rings.
  double dmin2 = std::numeric_limits<double>::infinity();
  int nearest = -1;
  int ring = 0;
  // Rings beyond the mesh box hold nothing; also bound the search for far points.
  const int ring_cap = max_ring_ + std::max({std::abs(k[0]), std::abs(k[1]), std::abs(k[2])});
  for (; ring <= ring_cap; ++ring) {
    visit_ring(ring, [&](int e) {
      const double d2 = (x - centroids_[e]).squaredNorm();
      if (d2 < dmin2 || (d2 == dmin2 && e < nearest)) {
        dmin2 = d2;
        nearest = e;
      }
    });
    if (nearest >= 0 && std::sqrt(dmin2) <= ring * bucket_) break;
  }
  if (nearest < 0) throw NumericalError("resolver: no element centroid found");

  std::vector<std::pair<int, double>> out;
  const double reach = std::sqrt(dmin2 + cutoff_sq_);
  const int rings = static_cast<int>(std::ceil(reach / bucket_)) + 1;
  double z = 0.0;
  for (int r = 0; r <= rings; ++r) {
    visit_ring(r, [&](int e) {
      const double shifted = (x - centroids_[e]).squaredNorm() - dmin2;
      if (shifted > cutoff_sq_) return;
      const double w = std::exp(-kappa_ * shifted);
      out.emplace_back(e, w);
      z += w;
    });
  }
  if (!(z > 0.0) || out.empty()) return {{nearest, 1.0}};
  double kept = 0.0;
  std::erase_if(out, [&](const auto& p) { return p.second / z < cfg_.q_min; });
  for (const auto& p : out) kept += p.second;
  if (out.empty() || !(kept > 0.0)) return {{nearest, 1.0}};
  for (auto& p : out) p.second /= kept;
  std::sort(out.begin(), out.end());
  return out;
}

double GradedStructure::element_level(std::size_t e, const Vec3& x) const {
  if (!phi0_[e]) throw ConfigError("resolver: element " + std::to_string(e) + " is void");
  if (waves_[e].waves.empty()) {
    throw ConfigError("resolver: element " + std::to_string(e) + " has no wave set (outside the prepared region)");
  }
  return evaluate_grf(waves_[e], x) - *phi0_[e];
}

double GradedStructure::interpolated_grf(const Vec3& x, double* support) const {
  double sum = 0.0, share = 0.0;
  for (const auto& [e, q] : weights(x)) {
    if (!phi0_[e]) continue;
    sum += q * element_level(e, x);
    share += q;
  }
  if (support) *support = share;
  return share > 0.0 ? sum : std::numeric_limits<double>::infinity();
}

bool GradedStructure::inside_mesh(const Vec3& x) const {
  const auto it = tet_buckets_.find(key(x, bucket_));
  if (it == tet_buckets_.end()) return false;
  constexpr double kTol = 1e-10;
  for (int e : it->second) {
    const Vec3 l = tet_inv_[e] * (x - tet_origin_[e]);
    if (l.minCoeff() >= -kTol && l.sum() <= 1.0 + kTol) return true;
  }
  return false;
}

bool GradedStructure::solid(const Vec3& x) const {
  if (!inside_mesh(x)) return false;
  double support = 0.0;
  const double v = interpolated_grf(x, &support);
  return v <= 0.0 && support >= cfg_.min_support;
}

void GradedStructure::sample_slab(const VoxelGrid& lattice, int k, std::uint8_t* out, int workers) const {
  const int nx = lattice.dims[0], ny = lattice.dims[1];
  auto rows = [&](int j0, int j1) {
    for (int j = j0; j < j1; ++j)
      for (int i = 0; i < nx; ++i) out[i + static_cast<std::size_t>(nx) * j] = solid(lattice.cell_center(i, j, k)) ? 1 : 0;
  };
  workers = std::clamp(workers, 1, ny);
  if (workers == 1) {
    rows(0, ny);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(rows, ny * w / workers, ny * (w + 1) / workers);
  for (auto& t : pool) t.join();
}

VoxelGrid resolve_lattice(const TetMesh& mesh, const ResolveConfig& cfg, const std::optional<Box>& region) {
  const Box box = region ? *region : bounding_box(mesh.nodes);
  if (!((box.hi - box.lo).array() > 0.0).all()) throw ConfigError("resolver: region must have positive extent");
  const std::size_t total = static_cast<std::size_t>(cfg.resolution[0]) * cfg.resolution[1] * cfg.resolution[2];
  if (total > cfg.voxel_budget) {
    throw ConfigError("resolver: " + std::to_string(total) + " voxels exceed the budget of " +
                      std::to_string(cfg.voxel_budget));
  }
  VoxelGrid g;
  g.dims = cfg.resolution;
  g.origin = box.lo;
  g.spacing = (box.hi - box.lo).cwiseQuotient(Vec3(cfg.resolution[0], cfg.resolution[1], cfg.resolution[2]));
  return g;
}

VoxelGrid resolve_structure(const TetMesh& mesh, const ElementField& field, const ResolveConfig& cfg,
                            const std::optional<Box>& region, ResolveStats* stats) {
  VoxelGrid g = resolve_lattice(mesh, cfg, region);
  g.data.assign(static_cast<std::size_t>(g.dims[0]) * g.dims[1] * g.dims[2], 0);
  const GradedStructure s(mesh, field, cfg, region);
  const std::size_t slab = static_cast<std::size_t>(g.dims[0]) * g.dims[1];
  for (int k = 0; k < g.dims[2]; ++k) s.sample_slab(g, k, g.data.data() + slab * k, cfg.workers);
  if (stats) {
    stats->dims = g.dims;
    stats->origin = g.origin;
    stats->spacing = g.spacing;
    stats->total_voxels = g.size();
    stats->solid_voxels = g.solid_count();
    stats->kappa = s.kappa();
    stats->mean_spacing = s.spacing();
  }
  return g;
}

ResolveStats resolve_to_vtk(const TetMesh& mesh, const ElementField& field, const ResolveConfig& cfg,
                            const std::optional<Box>& region, const std::filesystem::path& path, bool binary,
                            const std::function<void(int, int)>& progress) {
  const VoxelGrid lattice = resolve_lattice(mesh, cfg, region);
  const GradedStructure s(mesh, field, cfg, region);
  ResolveStats stats;
  stats.dims = lattice.dims;
  stats.origin = lattice.origin;
  stats.spacing = lattice.spacing;
  stats.kappa = s.kappa();
  stats.mean_spacing = s.spacing();
  StructuredPointsWriter writer(path, lattice.dims, lattice.origin, lattice.spacing, binary,
                                "spinodoid resolved structure");
  std::vector<std::uint8_t> slab(static_cast<std::size_t>(lattice.dims[0]) * lattice.dims[1]);
  for (int k = 0; k < lattice.dims[2]; ++k) {
    s.sample_slab(lattice, k, slab.data(), cfg.workers);
    for (auto v : slab) stats.solid_voxels += v;
    writer.write(slab.data(), slab.size());
    if (progress) progress(k + 1, lattice.dims[2]);
  }
  writer.close();
  stats.total_voxels = static_cast<std::size_t>(lattice.dims[0]) * lattice.dims[1] * lattice.dims[2];
  return stats;
}

double mean_field_density(const TetMesh& mesh, const ElementField& field, const TransformConfig& cfg,
                          const std::optional<Box>& region) {
  double acc = 0.0, vol = 0.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (region && !region->contains(mesh.centroid(e), 0.0)) continue;
    const double v = mesh.element_volume(e);
    acc += v * transform_rho(field[e].rho, cfg);
    vol += v;
  }
  return vol > 0.0 ? acc / vol : 0.0;
}

}  // namespace spinodoid
