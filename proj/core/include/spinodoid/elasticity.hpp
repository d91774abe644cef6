#pragma once

#include <vector>

#include "spinodoid/types.hpp"

namespace spinodoid {

struct BaseMaterial {
  double youngs_modulus = 1.0;
  double poisson_ratio = 0.3;

  void validate() const;
};

// Isotropic Voigt stiffness from the Lame constants.
VoigtStiffness base_material_stiffness(const BaseMaterial& mat);

struct OrthotropicSplit {
  OrthotropicNine moduli;
  // Frobenius norm of the entries dropped by the orthotropic projection.
  double remainder_norm = 0.0;
};

OrthotropicSplit extract_orthotropic(const VoigtStiffness& c);

// Places the nine moduli into Voigt order with zero coupling elsewhere.
VoigtStiffness expand_orthotropic(const OrthotropicNine& s);

// d(expand(s))/ds_k is the constant 0/1 pattern below; exposed for chain rules.
VoigtStiffness orthotropic_basis(int k);

// Directional Young's modulus E(d) = 1 / (sum C^-1_ijkl d_i d_j d_k d_l).
// Throws NumericalError if c is singular.
double youngs_modulus(const VoigtStiffness& c, const Vec3& d);

// Near-uniform directions on the unit sphere (Fibonacci lattice).
std::vector<Vec3> sphere_directions(int count);

// Symmetric-part helpers for stiffness checks.
double asymmetry_norm(const VoigtStiffness& c);
double min_eigenvalue(const VoigtStiffness& c);

}  // namespace spinodoid
