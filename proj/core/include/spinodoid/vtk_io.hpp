#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "spinodoid/tet_mesh.hpp"
#include "spinodoid/voxel_grid.hpp"

namespace spinodoid {

// Legacy VTK STRUCTURED_POINTS with one unsigned_char CELL_DATA array "xi".
// Cells are written k-major in slabs so large grids never live in memory.
class StructuredPointsWriter {
 public:
  StructuredPointsWriter(const std::filesystem::path& path, std::array<int, 3> dims, const Vec3& origin,
                         const Vec3& spacing, bool binary, const std::string& title = "spinodoid voxel grid");
  // Appends cells in storage order.
  void write(const std::uint8_t* cells, std::size_t count);
  // Throws if fewer cells than dims imply were written.
  void close();
  ~StructuredPointsWriter();

 private:
  std::ofstream out_;
  std::size_t expected_ = 0;
  std::size_t written_ = 0;
  bool binary_;
  bool closed_ = false;
};

void write_vtk_structured_points(const std::filesystem::path& path, const VoxelGrid& grid, bool binary = false);
VoxelGrid read_vtk_structured_points(const std::filesystem::path& path);

// Legacy VTK UNSTRUCTURED_GRID of tetrahedra with scalar CELL_DATA arrays.
void write_vtk_tet_mesh(const std::filesystem::path& path, const TetMesh& mesh,
                        const std::map<std::string, std::vector<double>>& cell_data);

}  // namespace spinodoid
