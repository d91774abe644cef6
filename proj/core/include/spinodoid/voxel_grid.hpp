#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "spinodoid/types.hpp"

namespace spinodoid {

// Binary solid/void indicator on a regular lattice. Cell (i, j, k) has its
// center at origin + spacing * (i + 1/2, j + 1/2, k + 1/2) and is stored at
// i + nx * (j + ny * k).
struct VoxelGrid {
  std::array<int, 3> dims{0, 0, 0};
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  std::vector<std::uint8_t> data;

  VoxelGrid() = default;
  VoxelGrid(std::array<int, 3> dims, Vec3 origin, Vec3 spacing);

  std::size_t size() const { return data.size(); }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
  }
  std::uint8_t operator()(int i, int j, int k) const { return data[index(i, j, k)]; }
  std::uint8_t& operator()(int i, int j, int k) { return data[index(i, j, k)]; }

  Vec3 cell_center(int i, int j, int k) const {
    return origin + spacing.cwiseProduct(Vec3(i + 0.5, j + 0.5, k + 0.5));
  }

  std::size_t solid_count() const;
  double solid_fraction() const;

  // Throws ConfigError when dims/spacing/data length are inconsistent.
  void validate() const;
};

}  // namespace spinodoid
