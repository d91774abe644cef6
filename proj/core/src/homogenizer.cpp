#include "spinodoid/homogenizer.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <vector>

#include "spinodoid/errors.hpp"

namespace spinodoid {

namespace {

using Hex24 = Eigen::Matrix<double, 24, 24>;
using Strain24 = Eigen::Matrix<double, 6, 24>;

constexpr std::array<int, 3> node_offset(int a) { return {a & 1, (a >> 1) & 1, (a >> 2) & 1}; }

// Strain-displacement matrix at natural coordinates (xi, eta, zeta).
Strain24 hex8_b(double h, double xi, double eta, double zeta) {
  Strain24 b = Strain24::Zero();
  const double jac = 2.0 / h;
  for (int a = 0; a < 8; ++a) {
    const auto off = node_offset(a);
    const double sx = 2.0 * off[0] - 1.0;
    const double sy = 2.0 * off[1] - 1.0;
    const double sz = 2.0 * off[2] - 1.0;
    const double dx = jac * sx * (1.0 + sy * eta) * (1.0 + sz * zeta) / 8.0;
    const double dy = jac * sy * (1.0 + sx * xi) * (1.0 + sz * zeta) / 8.0;
    const double dz = jac * sz * (1.0 + sx * xi) * (1.0 + sy * eta) / 8.0;
    const int c = 3 * a;
    b(0, c) = dx;
    b(1, c + 1) = dy;
    b(2, c + 2) = dz;
    b(3, c + 1) = dz;
    b(3, c + 2) = dy;
    b(4, c) = dz;
    b(4, c + 2) = dx;
    b(5, c) = dy;
    b(5, c + 1) = dx;
  }
  return b;
}

// Unit Voigt strain case j as a symmetric tensor (engineering shear halves).
Eigen::Matrix3d unit_strain_tensor(int j) {
  Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
  switch (j) {
    case 0: e(0, 0) = 1.0; break;
    case 1: e(1, 1) = 1.0; break;
    case 2: e(2, 2) = 1.0; break;
    case 3: e(1, 2) = e(2, 1) = 0.5; break;
    case 4: e(2, 0) = e(0, 2) = 0.5; break;
    case 5: e(0, 1) = e(1, 0) = 0.5; break;
  }
  return e;
}

}  // namespace

Hex24 hex8_stiffness(const VoigtStiffness& c, double h) {
  const double g = 1.0 / std::sqrt(3.0);
  const double weight = std::pow(h / 2.0, 3);  // det J times unit Gauss weights
  Hex24 k = Hex24::Zero();
  for (double xi : {-g, g}) {
    for (double eta : {-g, g}) {
      for (double zeta : {-g, g}) {
        const Strain24 b = hex8_b(h, xi, eta, zeta);
        k.noalias() += weight * b.transpose() * c * b;
      }
    }
  }
  return 0.5 * (k + k.transpose());
}

Strain24 hex8_mean_strain_matrix(double h) { return hex8_b(h, 0.0, 0.0, 0.0); }

VoxelGrid remove_floating_islands(const VoxelGrid& grid, int* removed_count) {
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  std::vector<int> label(grid.size(), -1);
  VoxelGrid out = grid;
  int removed = 0;
  std::vector<std::size_t> members;
  std::deque<std::array<int, 3>> queue;
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t seed = grid.index(i, j, k);
        if (!grid.data[seed] || label[seed] >= 0) continue;
        members.clear();
        bool touches_boundary = false;
        label[seed] = 1;
        queue.push_back({i, j, k});
        while (!queue.empty()) {
          const auto [ci, cj, ck] = queue.front();
          queue.pop_front();
          members.push_back(grid.index(ci, cj, ck));
          if (ci == 0 || cj == 0 || ck == 0 || ci == nx - 1 || cj == ny - 1 || ck == nz - 1) {
            touches_boundary = true;
          }
          static constexpr int kNeighbors[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                                   {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
          for (const auto& d : kNeighbors) {
            const int a = ci + d[0], b = cj + d[1], c = ck + d[2];
            if (a < 0 || b < 0 || c < 0 || a >= nx || b >= ny || c >= nz) continue;
            const std::size_t q = grid.index(a, b, c);
            if (grid.data[q] && label[q] < 0) {
              label[q] = 1;
              queue.push_back({a, b, c});
            }
          }
        }
        if (!touches_boundary) {
          ++removed;
          for (std::size_t q : members) out.data[q] = 0;
        }
      }
    }
  }
  if (removed_count) *removed_count = removed;
  return out;
}

HomogenizeResult homogenize(const VoxelGrid& grid, const BaseMaterial& mat,
                            const HomogenizeOptions& options) {
  grid.validate();
  const double h = grid.spacing.x();
  if (std::abs(grid.spacing.y() - h) > 1e-12 * h || std::abs(grid.spacing.z() - h) > 1e-12 * h) {
    throw DomainError("homogenize: voxel spacing must be cubic");
  }
  const VoigtStiffness cs = base_material_stiffness(mat);

  HomogenizeResult result;
  result.solid_fraction = grid.solid_fraction();
  VoxelGrid solid = options.remove_islands ? remove_floating_islands(grid, &result.islands_removed)
                                           : grid;
  result.kept_fraction = solid.solid_fraction();
  if (solid.solid_count() == 0) return result;  // no load path: zero stiffness

  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  const int mx = nx + 1, my = ny + 1, mz = nz + 1;
  auto node_id = [&](int i, int j, int k) {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(mx) * (j + static_cast<std::size_t>(my) * k);
  };
  const std::size_t n_nodes = static_cast<std::size_t>(mx) * my * mz;

  // Active nodes belong to a kept cell; boundary-active nodes are prescribed.
  std::vector<std::uint8_t> active(n_nodes, 0);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (solid(i, j, k))
          for (int a = 0; a < 8; ++a) {
            const auto o = node_offset(a);
            active[node_id(i + o[0], j + o[1], k + o[2])] = 1;
          }
  std::vector<int> free_index(n_nodes, -1);
  int n_free = 0;
  for (int k = 0; k < mz; ++k)
    for (int j = 0; j < my; ++j)
      for (int i = 0; i < mx; ++i) {
        const std::size_t id = node_id(i, j, k);
        const bool on_boundary = i == 0 || j == 0 || k == 0 || i == nx || j == ny || k == nz;
        if (active[id] && !on_boundary) free_index[id] = n_free++;
      }
  result.free_dofs = 3 * n_free;

  const Hex24 ke = hex8_stiffness(cs, h);
  const Strain24 b_mean = hex8_mean_strain_matrix(h);

  std::array<Eigen::Matrix3d, 6> strain;
  for (int j = 0; j < 6; ++j) strain[j] = unit_strain_tensor(j);
  auto affine = [&](int case_id, int i, int j, int k) -> Eigen::Vector3d {
    return strain[case_id] * (h * Eigen::Vector3d(i, j, k));
  };

  // Node-block assembly: each free node couples with at most 27 neighbors.
  const std::size_t n_blocks = static_cast<std::size_t>(n_free) * 27;
  std::vector<double> blocks(n_blocks * 9, 0.0);
  std::vector<std::uint8_t> touched(n_blocks, 0);
  Eigen::Matrix<double, Eigen::Dynamic, 6> rhs = Eigen::Matrix<double, Eigen::Dynamic, 6>::Zero(3 * n_free, 6);

  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!solid(i, j, k)) continue;
        for (int a = 0; a < 8; ++a) {
          const auto oa = node_offset(a);
          const int fa = free_index[node_id(i + oa[0], j + oa[1], k + oa[2])];
          if (fa < 0) continue;
          for (int b = 0; b < 8; ++b) {
            const auto ob = node_offset(b);
            const int bi = i + ob[0], bj = j + ob[1], bk = k + ob[2];
            const int fb = free_index[node_id(bi, bj, bk)];
            const auto kab = ke.block<3, 3>(3 * a, 3 * b);
            if (fb >= 0) {
              const int slot = (ob[0] - oa[0] + 1) + 3 * (ob[1] - oa[1] + 1) + 9 * (ob[2] - oa[2] + 1);
              const std::size_t blk = static_cast<std::size_t>(fa) * 27 + slot;
              touched[blk] = 1;
              double* dst = blocks.data() + blk * 9;
              for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) dst[3 * r + c] += kab(r, c);
            } else {
              for (int cs_id = 0; cs_id < 6; ++cs_id) {
                rhs.block<3, 1>(3 * fa, cs_id) -= kab * affine(cs_id, bi, bj, bk);
              }
            }
          }
        }
      }

  // Free indices follow node order, so scanning slots by (dz, dy, dx) yields
  // sorted column indices within each column of the symmetric matrix.
  std::vector<int> free_nodes(n_free);
  std::vector<std::array<int, 3>> free_ijk(n_free);
  for (int k = 0; k < mz; ++k)
    for (int j = 0; j < my; ++j)
      for (int i = 0; i < mx; ++i) {
        const int f = free_index[node_id(i, j, k)];
        if (f >= 0) free_ijk[f] = {i, j, k};
      }
  SparseMatrix kmat(3 * n_free, 3 * n_free);
  kmat.reserve(static_cast<Eigen::Index>(81) * 3 * n_free);
  for (int fa = 0; fa < n_free; ++fa) {
    const auto [i, j, k] = free_ijk[fa];
    for (int c = 0; c < 3; ++c) {
      const int col = 3 * fa + c;
      kmat.startVec(col);
      for (int slot = 0; slot < 27; ++slot) {
        const std::size_t blk = static_cast<std::size_t>(fa) * 27 + slot;
        if (!touched[blk]) continue;
        const int di = slot % 3 - 1, dj = (slot / 3) % 3 - 1, dk = slot / 9 - 1;
        const int fb = free_index[node_id(i + di, j + dj, k + dk)];
        const double* src = blocks.data() + blk * 9;
        // Block (fa, fb) holds K[3fa + r, 3fb + c]; by symmetry it is also
        // column 3fa + c, rows 3fb + r.
        for (int r = 0; r < 3; ++r) kmat.insertBackByOuterInner(col, 3 * fb + r) = src[3 * c + r];
      }
    }
  }
  kmat.finalize();
  blocks.clear();
  blocks.shrink_to_fit();

  Eigen::Matrix<double, Eigen::Dynamic, 6> u_free(3 * n_free, 6);
  if (n_free > 0) {
    SpdSolver solver(kmat, options.solver);
    for (int cs_id = 0; cs_id < 6; ++cs_id) {
      SolveStats stats;
      u_free.col(cs_id) = solver.solve(rhs.col(cs_id), &stats);
      result.max_relative_residual = std::max(result.max_relative_residual, stats.relative_residual);
      result.regularized = result.regularized || stats.regularized;
    }
  }

  // Volume-averaged stress over the whole RVE; void cells contribute zero.
  const double volume = (nx * h) * (ny * h) * (nz * h);
  const double cell_volume = h * h * h;
  const Eigen::Matrix<double, 6, 24> cb = cs * b_mean;
  Eigen::Matrix<double, 6, 6> stress_sum = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 24, 6> ue;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!solid(i, j, k)) continue;
        for (int a = 0; a < 8; ++a) {
          const auto o = node_offset(a);
          const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
          const int f = free_index[node_id(ni, nj, nk)];
          for (int cs_id = 0; cs_id < 6; ++cs_id) {
            ue.block<3, 1>(3 * a, cs_id) =
                f >= 0 ? Eigen::Vector3d(u_free.block<3, 1>(3 * f, cs_id)) : affine(cs_id, ni, nj, nk);
          }
        }
        stress_sum.noalias() += cb * ue;
      }
  const VoigtStiffness raw = stress_sum * (cell_volume / volume);
  result.raw_asymmetry = asymmetry_norm(raw);
  result.stiffness = 0.5 * (raw + raw.transpose());
  return result;
}

}  // namespace spinodoid
