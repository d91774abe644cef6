#include "spinodoid/voxel_grid.hpp"

#include <algorithm>
#include <numeric>

#include "spinodoid/errors.hpp"

namespace spinodoid {

VoxelGrid::VoxelGrid(std::array<int, 3> dims_, Vec3 origin_, Vec3 spacing_)
    : dims(dims_), origin(origin_), spacing(spacing_) {
  if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) {
    throw ConfigError("VoxelGrid: dims must be positive");
  }
  data.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0);
}

std::size_t VoxelGrid::solid_count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

double VoxelGrid::solid_fraction() const {
  return data.empty() ? 0.0 : static_cast<double>(solid_count()) / static_cast<double>(data.size());
}

void VoxelGrid::validate() const {
  if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) {
    throw ConfigError("VoxelGrid: dims must be positive");
  }
  if (!(spacing.array() > 0.0).all()) {
    throw ConfigError("VoxelGrid: spacing must be positive");
  }
  if (data.size() != static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]) {
    throw ConfigError("VoxelGrid: data length does not match dims");
  }
  if (std::any_of(data.begin(), data.end(), [](std::uint8_t v) { return v > 1; })) {
    throw ConfigError("VoxelGrid: indicator values must be 0 or 1");
  }
}

}  // namespace spinodoid
