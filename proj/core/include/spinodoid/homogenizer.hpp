#pragma once

#include <Eigen/Core>

#include "spinodoid/elasticity.hpp"
#include "spinodoid/linear_solver.hpp"
#include "spinodoid/types.hpp"
#include "spinodoid/voxel_grid.hpp"

namespace spinodoid {

struct HomogenizeOptions {
  SolverOptions solver{};
  // Delete face-connected solid components that do not reach the RVE boundary.
  bool remove_islands = true;
};

struct HomogenizeResult {
  VoigtStiffness stiffness = VoigtStiffness::Zero();  // symmetrized
  double solid_fraction = 0.0;      // realized fraction of the input grid
  double kept_fraction = 0.0;       // fraction after island removal
  int islands_removed = 0;
  int free_dofs = 0;
  bool regularized = false;         // singular system solved with a diagonal shift
  double max_relative_residual = 0.0;
  double raw_asymmetry = 0.0;       // ||C - C^T|| before symmetrization
};

// 24x24 stiffness of a cubic trilinear hexahedron of edge h, 2x2x2 Gauss.
// Local node a sits at h * (a & 1, (a >> 1) & 1, (a >> 2) & 1).
Eigen::Matrix<double, 24, 24> hex8_stiffness(const VoigtStiffness& c, double h);

// Element-averaged strain-displacement matrix of the same hexahedron.
Eigen::Matrix<double, 6, 24> hex8_mean_strain_matrix(double h);

// Labels face-connected solid components; returns the grid with every
// component that does not touch the lattice boundary removed.
VoxelGrid remove_floating_islands(const VoxelGrid& grid, int* removed_count = nullptr);

// Effective stiffness under six affine (kinematic uniform) load cases:
// three uniaxial stretches and three engineering shears. Requires a cubic
// voxel spacing.
HomogenizeResult homogenize(const VoxelGrid& grid, const BaseMaterial& mat,
                            const HomogenizeOptions& options = {});

}  // namespace spinodoid
