#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "spinodoid/design_space.hpp"
#include "spinodoid/linear_solver.hpp"
#include "spinodoid/tet_mesh.hpp"
#include "spinodoid/types.hpp"

namespace spinodoid {

using Matrix612 = Eigen::Matrix<double, 6, 12>;
using Matrix12d = Eigen::Matrix<double, 12, 12>;

struct DirichletCondition {
  int node = 0;
  int component = 0;  // 0, 1, 2
  double value = 0.0;
};

struct LoadCase {
  std::string name;
  std::vector<std::pair<int, double>> forces;  // (global dof = 3 node + component, value)
};

struct MacroProblem {
  TetMesh mesh;
  std::vector<DirichletCondition> dirichlet;
  std::vector<LoadCase> loads;

  void validate() const;
  // Dense nodal force vector of load case i.
  Eigen::VectorXd force_vector(std::size_t i) const;
};

// Constant-strain tetrahedron: strain-displacement matrix and volume.
struct TetGeometry {
  Matrix612 b = Matrix612::Zero();
  double volume = 0.0;
};

// Throws DomainError for an inverted or degenerate element.
TetGeometry tet_geometry(const std::array<Vec3, 4>& x);

// k = V B^T C B
Matrix12d element_stiffness(const TetGeometry& geo, const VoigtStiffness& c);
Matrix12d element_stiffness(const std::array<Vec3, 4>& x, const VoigtStiffness& c);

struct SolveResult {
  std::vector<Eigen::VectorXd> u;  // full nodal displacements per load case
  std::vector<double> compliance;  // U . F per load case
  std::vector<double> relative_residual;
  bool regularized = false;

  double total_compliance() const;
};

// Assembly and solution with Dirichlet elimination. The sparsity pattern and
// element scatter positions are built once; each solve refills the values,
// factors once, and reuses the factor across load cases.
class MacroFem {
 public:
  explicit MacroFem(MacroProblem problem, SolverOptions solver = {});

  const MacroProblem& problem() const { return problem_; }
  std::size_t element_count() const { return geometry_.size(); }
  const std::vector<TetGeometry>& geometry() const { return geometry_; }
  const std::vector<double>& volumes() const { return volumes_; }
  const std::vector<Vec3>& centroids() const { return centroids_; }
  int free_dof_count() const { return n_free_; }

  // One stiffness per element.
  SolveResult solve(const std::vector<VoigtStiffness>& c) const;

  // Element strain of load case `lc`.
  Vector6d element_strain(const SolveResult& result, std::size_t lc, std::size_t e) const;

  // U.K.U of load case `lc` assembled element by element.
  double strain_energy_product(const SolveResult& result, std::size_t lc, const std::vector<VoigtStiffness>& c) const;

 private:
  MacroProblem problem_;
  SolverOptions solver_;
  std::vector<TetGeometry> geometry_;
  std::vector<double> volumes_;
  std::vector<Vec3> centroids_;
  std::vector<int> free_index_;     // per global dof, -1 if prescribed
  Eigen::VectorXd prescribed_;      // per global dof
  int n_free_ = 0;
  SparseMatrix pattern_;
  std::vector<int> scatter_;        // element-major 144 slots; -1 if not free-free
};

// Per-element sensitivity -V sum_lc eps^T dC_j eps for the list of stiffness
// derivatives dc[e][j]; returns n_elements x n_params.
template <std::size_t P>
Eigen::MatrixXd compliance_sensitivity(const MacroFem& fem, const SolveResult& result,
                                       const std::vector<std::array<Matrix6d, P>>& dc) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(fem.element_count()), P);
  for (std::size_t lc = 0; lc < result.u.size(); ++lc) {
    for (std::size_t e = 0; e < fem.element_count(); ++e) {
      const Vector6d eps = fem.element_strain(result, lc, e);
      for (std::size_t j = 0; j < P; ++j) {
        out(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(j)) -= fem.volumes()[e] * eps.dot(dc[e][j] * eps);
      }
    }
  }
  return out;
}

double compliance(const SolveResult& result);
double objective_multi_load(const SolveResult& result);

// Cone-weighted sensitivity filter on centroid distances:
//   s_e <- sum_f w_ef v_f s_f / (max(v_e, eps) sum_f w_ef),  w_ef = max(0, r - |x_e - x_f|)
// applied column by column; `values` are the (non-negative) design variables
// the filter weights with. r = 0 returns the input.
class SensitivityFilter {
 public:
  SensitivityFilter(const std::vector<Vec3>& centroids, double radius, double epsilon = 1e-3);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& values, const Eigen::MatrixXd& sens) const;
  double radius() const { return radius_; }
  std::size_t neighbor_count(std::size_t e) const { return offsets_[e + 1] - offsets_[e]; }

 private:
  double radius_;
  double epsilon_;
  std::vector<std::size_t> offsets_;
  std::vector<int> neighbors_;
  std::vector<double> weights_;
  std::vector<double> weight_sums_;
};

Eigen::MatrixXd filter_sensitivities(const std::vector<Vec3>& centroids, const Eigen::MatrixXd& values,
                                     const Eigen::MatrixXd& sens, double radius, double epsilon = 1e-3);

struct VolumeConstraint {
  double value = 0.0;          // volume-weighted mean of rho' minus target
  Eigen::VectorXd gradient;    // d value / d rho_e
};

VolumeConstraint volume_constraint(const std::vector<double>& volumes, const Eigen::VectorXd& rho, double rho_bar,
                                   const TransformConfig& cfg);

}  // namespace spinodoid
