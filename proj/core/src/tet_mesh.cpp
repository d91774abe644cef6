#include "spinodoid/tet_mesh.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <limits>
#include <string>

#include "spinodoid/errors.hpp"

namespace spinodoid {

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

std::array<Vec3, 4> TetMesh::element_nodes(std::size_t e) const {
  const auto& t = tets[e];
  return {nodes[t[0]], nodes[t[1]], nodes[t[2]], nodes[t[3]]};
}

double TetMesh::element_volume(std::size_t e) const {
  const auto p = element_nodes(e);
  return signed_tet_volume(p[0], p[1], p[2], p[3]);
}

Vec3 TetMesh::centroid(std::size_t e) const {
  const auto p = element_nodes(e);
  return 0.25 * (p[0] + p[1] + p[2] + p[3]);
}

double TetMesh::total_volume() const {
  double v = 0.0;
  for (std::size_t e = 0; e < tets.size(); ++e) v += element_volume(e);
  return v;
}

void TetMesh::validate() const {
  if (tets.empty()) throw ConfigError("mesh: no elements");
  std::vector<char> used(nodes.size(), 0);
  for (std::size_t e = 0; e < tets.size(); ++e) {
    for (int n : tets[e]) {
      if (n < 0 || static_cast<std::size_t>(n) >= nodes.size()) {
        throw ConfigError("mesh: element " + std::to_string(e) + " references missing node " + std::to_string(n));
      }
      used[n] = 1;
    }
    if (!(element_volume(e) > 0.0)) {
      throw ConfigError("mesh: element " + std::to_string(e) + " has non-positive volume");
    }
  }
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    if (!used[n]) throw ConfigError("mesh: node " + std::to_string(n) + " is not used by any element");
  }
}

TetMesh structured_box_mesh(const Vec3& dims, std::array<int, 3> divisions, const Vec3& origin,
                            const std::function<bool(const Vec3&)>& keep) {
  for (int d : divisions) {
    if (d < 1) throw ConfigError("mesh: divisions must be at least 1");
  }
  if (!(dims.array() > 0.0).all()) throw ConfigError("mesh: box dimensions must be positive");
  const int nx = divisions[0], ny = divisions[1], nz = divisions[2];
  const Vec3 h = dims.cwiseQuotient(Vec3(nx, ny, nz));
  auto grid_id = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };
  const int n_grid = (nx + 1) * (ny + 1) * (nz + 1);

  std::vector<int> node_map(n_grid, -1);
  TetMesh mesh;
  auto node = [&](int i, int j, int k) {
    int& id = node_map[grid_id(i, j, k)];
    if (id < 0) {
      id = static_cast<int>(mesh.nodes.size());
      mesh.nodes.push_back(origin + h.cwiseProduct(Vec3(i, j, k)));
    }
    return id;
  };
  // Monotone lattice paths from corner 0 to corner 7, one per axis order.
  static constexpr int kOrders[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};

  // First pass decides which cubes exist so node numbering follows lattice order.
  std::vector<char> kept(static_cast<std::size_t>(nx) * ny * nz, 1);
  if (keep) {
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const Vec3 center = origin + h.cwiseProduct(Vec3(i + 0.5, j + 0.5, k + 0.5));
          kept[i + nx * (j + ny * k)] = keep(center) ? 1 : 0;
        }
  }
  std::vector<char> needed(n_grid, 0);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!kept[i + nx * (j + ny * k)]) continue;
        for (int c = 0; c < 8; ++c) needed[grid_id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))] = 1;
      }
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i)
        if (needed[grid_id(i, j, k)]) node(i, j, k);

  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!kept[i + nx * (j + ny * k)]) continue;
        for (const auto& order : kOrders) {
          std::array<int, 3> p{i, j, k};
          std::array<int, 4> tet{};
          tet[0] = node(p[0], p[1], p[2]);
          for (int s = 0; s < 3; ++s) {
            ++p[order[s]];
            tet[s + 1] = node(p[0], p[1], p[2]);
          }
          const auto& x = mesh.nodes;
          if (signed_tet_volume(x[tet[0]], x[tet[1]], x[tet[2]], x[tet[3]]) < 0.0) std::swap(tet[2], tet[3]);
          mesh.tets.push_back(tet);
        }
      }
  return mesh;
}

std::vector<int> nodes_in_box(const TetMesh& mesh, const Box& box) {
  std::vector<int> out;
  for (std::size_t n = 0; n < mesh.nodes.size(); ++n) {
    if (box.contains(mesh.nodes[n])) out.push_back(static_cast<int>(n));
  }
  return out;
}

int nearest_node(const TetMesh& mesh, const Vec3& p) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < mesh.nodes.size(); ++n) {
    const double d = (mesh.nodes[n] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(n);
    }
  }
  if (best < 0) throw ConfigError("mesh: no nodes");
  return best;
}

}  // namespace spinodoid
