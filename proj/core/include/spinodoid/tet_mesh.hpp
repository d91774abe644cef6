#pragma once

#include <array>
#include <functional>
#include <vector>

#include "spinodoid/types.hpp"

namespace spinodoid {

struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& p, double tol = 1e-9) const {
    return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
  }
};

// Linear tetrahedral mesh; node indices of each element are ordered so the
// signed volume is positive.
struct TetMesh {
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 4>> tets;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t element_count() const { return tets.size(); }

  std::array<Vec3, 4> element_nodes(std::size_t e) const;
  double element_volume(std::size_t e) const;
  Vec3 centroid(std::size_t e) const;
  double total_volume() const;

  // Throws ConfigError on out-of-range indices, non-positive volumes, or
  // nodes not referenced by any element.
  void validate() const;
};

// Signed volume of (a, b, c, d).
double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

// Box [origin, origin + dims] split into nx*ny*nz cubes, each cut into six
// tetrahedra sharing the cube's main diagonal (Kuhn subdivision). Cubes whose
// center fails `keep` are omitted and orphan nodes dropped.
TetMesh structured_box_mesh(const Vec3& dims, std::array<int, 3> divisions, const Vec3& origin = Vec3::Zero(),
                            const std::function<bool(const Vec3&)>& keep = {});

std::vector<int> nodes_in_box(const TetMesh& mesh, const Box& box);
int nearest_node(const TetMesh& mesh, const Vec3& p);

}  // namespace spinodoid
