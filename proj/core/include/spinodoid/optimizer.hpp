#pragma once

#include <array>
#include <functional>
#include <vector>

#include "spinodoid/design_space.hpp"
#include "spinodoid/macro_fem.hpp"
#include "spinodoid/metadata.hpp"
#include "spinodoid/mma.hpp"
#include "spinodoid/surrogate.hpp"

namespace spinodoid {

using ElementField = std::vector<DesignParamsChi>;

struct OptConfig {
  int max_iterations = 300;
  MmaSettings mma;
  // Converged when the relative compliance change stays below `tolerance`
  // for `tolerance_window` consecutive iterations at a feasible design.
  double tolerance = 1e-4;
  int tolerance_window = 5;
  // A step raising the compliance by more than accept_tolerance (relative)
  // is rejected and retried with half the move limit, down to min_move_limit.
  double accept_tolerance = 1e-4;
  double min_move_limit = 1e-4;
  double feasibility_tolerance = 1e-3;
  double volume_target = 0.5;
  double filter_radius = 0.075;
  double filter_epsilon = 1e-3;
  DesignSpaceConfig design;
  DesignParamsChi initial{0.5, deg2rad(15.0), 0.0, 0.0, 0.0};
  // Slots (rho, theta1, theta2, theta3, alpha) the optimizer may change.
  std::array<bool, 5> active{true, true, true, true, true};

  void validate() const;
  Json to_json() const;
};

struct OptHistory {
  std::vector<double> compliance;
  std::vector<double> volume;      // volume-constraint value g
  std::vector<double> max_change;  // max |x - x_accepted| of the step that produced this design
  std::vector<bool> accepted;

  std::size_t size() const { return compliance.size(); }
};

struct OptResult {
  ElementField field;
  OptHistory history;
  double initial_compliance = 0.0;
  double final_compliance = 0.0;
  double final_volume = 0.0;  // volume-weighted mean transformed density
  int iterations = 0;
  bool converged = false;
};

using ProgressFn = std::function<void(int iteration, double compliance, double volume_violation)>;

// Normalized optimizer variables in [0, 1]: rho, theta_i / (pi/2),
// (alpha + pi/2) / pi.
Vector5d to_normalized(const DesignParamsChi& chi);
DesignParamsChi from_normalized(const Vector5d& x);

double evaluate_compliance(const MacroFem& fem, const ElementField& field, const MlpModel& model,
                           const DesignSpaceConfig& cfg, SolveResult* result = nullptr);

// Analytic dPhi/dchi (elements x 5), unfiltered.
Eigen::MatrixXd design_sensitivity(const MacroFem& fem, const ElementField& field, const MlpModel& model,
                                   const DesignSpaceConfig& cfg, double* compliance_out = nullptr);

double mean_transformed_density(const std::vector<double>& volumes, const ElementField& field,
                                const TransformConfig& cfg);

OptResult minimize_compliance(const MacroFem& fem, const MlpModel& model, const OptConfig& cfg,
                              const ElementField* initial = nullptr, const ProgressFn& progress = {});

struct SimpResult {
  Eigen::VectorXd density;
  OptHistory history;
  double initial_compliance = 0.0;
  double final_compliance = 0.0;
  double final_volume = 0.0;
  int iterations = 0;
  bool converged = false;
};

// C(rho) = C0 + (C_s - C0) rho^p with C0 = floor * C_s.
VoigtStiffness simp_stiffness(double rho, double penalty, const DesignSpaceConfig& cfg, VoigtStiffness* derivative = nullptr);
double simp_compliance(const MacroFem& fem, const Eigen::VectorXd& density, double penalty, const DesignSpaceConfig& cfg);

SimpResult simp_baseline(const MacroFem& fem, double penalty, const OptConfig& cfg, const ProgressFn& progress = {});

struct ThresholdResult {
  ElementField field;
  double volume_before = 0.0;  // mean transformed density
  double volume_after = 0.0;
  double drift = 0.0;          // after - before
  int voided = 0;
  int projected = 0;
};

// rho' < cut -> rho = 0; otherwise rho = max(rho, rho_min). Angles and alpha
// are untouched. cut < 0 selects rho_min / 2.
ThresholdResult threshold_design(const ElementField& field, const std::vector<double>& volumes,
                                 const TransformConfig& cfg, double cut = -1.0);

}  // namespace spinodoid
