#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "spinodoid/design_space.hpp"
#include "spinodoid/metadata.hpp"
#include "spinodoid/spinodoid_gen.hpp"
#include "spinodoid/tet_mesh.hpp"
#include "spinodoid/voxel_grid.hpp"

namespace spinodoid {

using ElementField = std::vector<DesignParamsChi>;

enum class SeedPolicy {
  kPerElement,  // element e uses derive_seed(master, e)
  kShared,      // every element uses the master seed
};

struct ResolveConfig {
  double beta = 1600.0 * kPi / 3.0;
  double kappa = 0.0;  // <= 0 selects ln(1e4) / h^2, h the mean nearest-centroid spacing
  double q_min = 1e-6;
  int n_waves = kDefaultWaveCount;
  std::array<int, 3> resolution{64, 64, 64};  // voxels per axis over the region
  std::uint64_t seed = 0;
  SeedPolicy seed_policy = SeedPolicy::kPerElement;
  std::size_t voxel_budget = 200'000'000;
  // Solid additionally requires this share of the weight on non-void elements.
  double min_support = 0.5;
  int workers = 1;
  TransformConfig transform;

  void validate() const;
  Json to_json() const;
};

SeedPolicy parse_seed_policy(const std::string& name);

// Gaussian partition-of-unity weights of x for all centers (no cutoff).
std::vector<double> partition_weights(const Vec3& x, const std::vector<Vec3>& centers, double kappa);

// Mean distance from each centroid to its nearest neighbour.
double mean_nearest_spacing(const std::vector<Vec3>& centers);

// Per-element GRFs of a macroscale design blended into one level set.
class GradedStructure {
 public:
  // Wave sets are built only for elements that can influence `region`
  // (every element when absent).
  GradedStructure(const TetMesh& mesh, const ElementField& field, const ResolveConfig& cfg,
                  const std::optional<Box>& region = std::nullopt);

  double kappa() const { return kappa_; }
  double spacing() const { return spacing_; }
  std::size_t element_count() const { return centroids_.size(); }
  bool is_void(std::size_t e) const { return !phi0_[e].has_value(); }
  const std::vector<Vec3>& centroids() const { return centroids_; }
  // Rotated wave set of element e; empty when void or outside the prepared region.
  const WaveSet& waves(std::size_t e) const { return waves_[e]; }

  // Weights after the q_min cutoff, renormalized; falls back to the nearest
  // element when everything underflows.
  std::vector<std::pair<int, double>> weights(const Vec3& x) const;

  // phi^e(x) - phi0^e for a non-void element.
  double element_level(std::size_t e, const Vec3& x) const;

  // sum_e q_e (phi^e - phi0^e) over non-void elements; +inf when no non-void
  // element carries weight. `support` receives the non-void weight share.
  double interpolated_grf(const Vec3& x, double* support = nullptr) const;

  bool inside_mesh(const Vec3& x) const;
  bool solid(const Vec3& x) const;

  // Fills one k-slab (nx * ny cells) of the lattice.
  void sample_slab(const VoxelGrid& lattice, int k, std::uint8_t* out, int workers) const;

 private:
  using Key = std::array<int, 3>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return static_cast<std::size_t>(k[0]) * 73856093u ^ static_cast<std::size_t>(k[1]) * 19349663u ^
             static_cast<std::size_t>(k[2]) * 83492791u;
    }
  };
  Key key(const Vec3& x, double cell) const;

  const TetMesh* mesh_;
  ResolveConfig cfg_;
  std::vector<Vec3> centroids_;
  std::vector<std::optional<double>> phi0_;
  std::vector<WaveSet> waves_;          // empty for void or out-of-region elements
  std::vector<Eigen::Matrix3d> tet_inv_;  // inverse edge matrices for containment
  std::vector<Vec3> tet_origin_;
  double kappa_ = 0.0;
  double spacing_ = 0.0;
  double cutoff_sq_ = 0.0;  // d^2 - dmin^2 beyond which q < q_min
  Vec3 lo_ = Vec3::Zero();
  double bucket_ = 1.0;
  std::unordered_map<Key, std::vector<int>, KeyHash> centroid_buckets_;
  std::unordered_map<Key, std::vector<int>, KeyHash> tet_buckets_;
  int max_ring_ = 0;
};

struct ResolveStats {
  std::array<int, 3> dims{0, 0, 0};
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Zero();
  std::size_t solid_voxels = 0;
  std::size_t total_voxels = 0;
  double kappa = 0.0;
  double mean_spacing = 0.0;

  double solid_fraction() const { return total_voxels ? static_cast<double>(solid_voxels) / total_voxels : 0.0; }
};

// Lattice over `region` (mesh bounding box when absent) at cfg.resolution.
VoxelGrid resolve_lattice(const TetMesh& mesh, const ResolveConfig& cfg, const std::optional<Box>& region);

// In-memory resolution (checked against the voxel budget).
VoxelGrid resolve_structure(const TetMesh& mesh, const ElementField& field, const ResolveConfig& cfg,
                            const std::optional<Box>& region = std::nullopt, ResolveStats* stats = nullptr);

// Streams k-slabs straight into a VTK file.
ResolveStats resolve_to_vtk(const TetMesh& mesh, const ElementField& field, const ResolveConfig& cfg,
                            const std::optional<Box>& region, const std::filesystem::path& path, bool binary,
                            const std::function<void(int, int)>& progress = {});

// Volume-weighted mean transformed density of the elements whose centroid
// lies in `region` (all elements when absent).
double mean_field_density(const TetMesh& mesh, const ElementField& field, const TransformConfig& cfg,
                          const std::optional<Box>& region = std::nullopt);

}  // namespace spinodoid
