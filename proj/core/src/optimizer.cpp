#include "spinodoid/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "spinodoid/errors.hpp"

namespace spinodoid {

namespace {

constexpr double kHalfPi = kPi / 2.0;
// d chi / d x for the normalized variables.
const Vector5d kScale = (Vector5d() << 1.0, kHalfPi, kHalfPi, kHalfPi, kPi).finished();

Json chi_json(const DesignParamsChi& c) {
  return Json{{"rho", c.rho},
              {"theta_deg", {rad2deg(c.theta1), rad2deg(c.theta2), rad2deg(c.theta3)}},
              {"alpha_deg", rad2deg(c.alpha)}};
}

// Tracks the relative-change convergence window.
struct ConvergenceWindow {
  double tolerance;
  int window;
  int streak = 0;
  double last = std::numeric_limits<double>::quiet_NaN();

  bool update(double value, bool feasible) {
    if (std::isfinite(last) && std::abs(value - last) <= tolerance * std::max(std::abs(value), 1e-300)) ++streak;
    else streak = 0;
    last = value;
    return feasible && streak >= window;
  }
};

}  // namespace

void OptConfig::validate() const {
  if (max_iterations < 0) throw ConfigError("optimizer: max_iterations must be non-negative");
  mma.validate();
  if (!(tolerance > 0.0) || tolerance_window < 1) throw ConfigError("optimizer: tolerance must be positive");
  if (!(feasibility_tolerance > 0.0)) throw ConfigError("optimizer: feasibility tolerance must be positive");
  if (!(volume_target > 0.0 && volume_target <= 1.0)) {
    throw ConfigError("optimizer: volume target " + std::to_string(volume_target) + " is infeasible (need 0 < rho_bar <= 1)");
  }
  if (!(filter_radius >= 0.0) || !(filter_epsilon > 0.0)) throw ConfigError("optimizer: invalid filter settings");
  if (!(accept_tolerance >= 0.0) || !(min_move_limit > 0.0 && min_move_limit <= mma.move_limit)) {
    throw ConfigError("optimizer: need accept_tolerance >= 0 and 0 < min_move_limit <= move_limit");
  }
  design.validate();
  initial.validate();
}

Json OptConfig::to_json() const {
  return Json{{"max_iterations", max_iterations},
              {"move_limit", mma.move_limit},
              {"min_move_limit", min_move_limit},
              {"accept_tolerance", accept_tolerance},
              {"tolerance", tolerance},
              {"tolerance_window", tolerance_window},
              {"feasibility_tolerance", feasibility_tolerance},
              {"volume_target", volume_target},
              {"filter_radius", filter_radius},
              {"filter_epsilon", filter_epsilon},
              {"lambda1", design.transform.lambda1},
              {"lambda2", design.transform.lambda2},
              {"stiffness_floor", design.stiffness_floor},
              {"void_gate", design.void_gate},
              {"spectral_floor", design.spectral_floor},
              {"initial", chi_json(initial)},
              {"active", active}};
}

Vector5d to_normalized(const DesignParamsChi& chi) {
  return (Vector5d() << chi.rho, chi.theta1 / kHalfPi, chi.theta2 / kHalfPi, chi.theta3 / kHalfPi,
          (chi.alpha + kHalfPi) / kPi)
      .finished();
}

DesignParamsChi from_normalized(const Vector5d& x) {
  return {x[0], x[1] * kHalfPi, x[2] * kHalfPi, x[3] * kHalfPi, x[4] * kPi - kHalfPi};
}

double evaluate_compliance(const MacroFem& fem, const ElementField& field, const MlpModel& model,
                           const DesignSpaceConfig& cfg, SolveResult* result) {
  const auto micro = evaluate_micro_batch(field, model, cfg, false);
  std::vector<VoigtStiffness> c(micro.size());
  for (std::size_t e = 0; e < micro.size(); ++e) c[e] = micro[e].c;
  SolveResult r = fem.solve(c);
  const double phi = r.total_compliance();
  if (result) *result = std::move(r);
  return phi;
}

Eigen::MatrixXd design_sensitivity(const MacroFem& fem, const ElementField& field, const MlpModel& model,
                                   const DesignSpaceConfig& cfg, double* compliance_out) {
  const auto micro = evaluate_micro_batch(field, model, cfg, true);
  std::vector<VoigtStiffness> c(micro.size());
  std::vector<std::array<Matrix6d, 5>> dc(micro.size());
  for (std::size_t e = 0; e < micro.size(); ++e) {
    c[e] = micro[e].c;
    dc[e] = micro[e].dc;
  }
  const SolveResult r = fem.solve(c);
  if (compliance_out) *compliance_out = r.total_compliance();
  return compliance_sensitivity(fem, r, dc);
}

double mean_transformed_density(const std::vector<double>& volumes, const ElementField& field,
                                const TransformConfig& cfg) {
  double acc = 0.0, total = 0.0;
  for (std::size_t e = 0; e < field.size(); ++e) {
    acc += volumes[e] * transform_rho(field[e].rho, cfg);
    total += volumes[e];
  }
  return acc / total;
}

namespace {

struct Evaluation {
  double phi = 0.0;
  double g = 0.0;
  Eigen::VectorXd df;  // filtered objective gradient in x
  Eigen::VectorXd dg;
};

struct DriveResult {
  Eigen::VectorXd x;  // last accepted design
  Evaluation at_x;
  OptHistory history;
  double phi0 = 0.0;
  int iterations = 0;
  bool converged = false;
};

// MMA loop with step acceptance: a step that raises the compliance by more
// than accept_tolerance is undone and retried with half the move limit.
DriveResult drive(Eigen::VectorXd x, const OptConfig& cfg, const std::function<Evaluation(const Eigen::VectorXd&)>& eval,
                  const Eigen::Array<bool, Eigen::Dynamic, 1>* frozen, const Mma::ConstraintFn& exact,
                  const ProgressFn& progress) {
  DriveResult out;
  Mma mma(x.size(), cfg.mma), saved = mma;
  ConvergenceWindow window{cfg.tolerance, cfg.tolerance_window};
  double move = cfg.mma.move_limit;
  double change = 0.0;
  for (int it = 0;; ++it) {
    Evaluation ev = eval(x);
    if (!std::isfinite(ev.phi)) throw NumericalError("optimizer: compliance is not finite at iteration " + std::to_string(it));
    if (it == 0) out.phi0 = ev.phi;
    const bool accepted =
        it == 0 || ev.phi <= out.at_x.phi * (1.0 + cfg.accept_tolerance) || move <= cfg.min_move_limit;
    out.history.compliance.push_back(ev.phi);
    out.history.volume.push_back(ev.g);
    out.history.max_change.push_back(change);
    out.history.accepted.push_back(accepted);
    if (progress) progress(it, ev.phi, ev.g);
    out.iterations = it;

    if (accepted) {
      out.x = x;
      out.at_x = std::move(ev);
      if (out.phi0 == 0.0 || window.update(out.at_x.phi, std::abs(out.at_x.g) <= cfg.feasibility_tolerance)) {
        out.converged = true;
        break;
      }
      move = std::min(1.2 * move, cfg.mma.move_limit);
      saved = mma;
    } else {
      move = std::max(0.5 * move, cfg.min_move_limit);
      mma = saved;
    }
    if (it >= cfg.max_iterations) break;
    mma.set_move_limit(move);
    x = mma.step(out.x, out.at_x.df / out.phi0, out.at_x.g, out.at_x.dg, frozen, exact);
    change = (x - out.x).cwiseAbs().maxCoeff();
  }
  return out;
}

}  // namespace

OptResult minimize_compliance(const MacroFem& fem, const MlpModel& model, const OptConfig& cfg,
                              const ElementField* initial, const ProgressFn& progress) {
  cfg.validate();
  model.validate();
  const std::size_t n = fem.element_count();
  const ElementField start = initial ? *initial : ElementField(n, cfg.initial);
  if (start.size() != n) throw ConfigError("optimizer: initial field size does not match the mesh");
  for (const auto& chi : start) chi.validate();

  const SensitivityFilter filter(fem.centroids(), cfg.filter_radius, cfg.filter_epsilon);
  const auto n_var = static_cast<Eigen::Index>(5 * n);
  Eigen::VectorXd x(n_var);
  for (std::size_t e = 0; e < n; ++e) x.segment<5>(static_cast<Eigen::Index>(5 * e)) = to_normalized(start[e]);
  Eigen::Array<bool, Eigen::Dynamic, 1> frozen(n_var);
  for (Eigen::Index j = 0; j < n_var; ++j) frozen[j] = !cfg.active[static_cast<std::size_t>(j % 5)];

  // Inactive slots come from the start field exactly, no normalization round trip.
  const auto to_field = [&](const Eigen::VectorXd& y) {
    ElementField f(n);
    for (std::size_t e = 0; e < n; ++e) {
      Vector5d v = from_normalized(y.segment<5>(static_cast<Eigen::Index>(5 * e))).as_vector();
      const Vector5d old = start[e].as_vector();
      for (int j = 0; j < 5; ++j) {
        if (!cfg.active[static_cast<std::size_t>(j)]) v[j] = old[j];
      }
      f[e] = DesignParamsChi::from_vector(v);
      // Guard against rounding outside the box.
      f[e].rho = std::clamp(f[e].rho, 0.0, 1.0);
      f[e].theta1 = std::clamp(f[e].theta1, 0.0, kHalfPi);
      f[e].theta2 = std::clamp(f[e].theta2, 0.0, kHalfPi);
      f[e].theta3 = std::clamp(f[e].theta3, 0.0, kHalfPi);
      f[e].alpha = std::clamp(f[e].alpha, -kHalfPi, kHalfPi);
    }
    return f;
  };
  const auto density_of = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd rho(static_cast<Eigen::Index>(n));
    for (std::size_t e = 0; e < n; ++e) rho[static_cast<Eigen::Index>(e)] = std::clamp(y[static_cast<Eigen::Index>(5 * e)], 0.0, 1.0);
    if (!cfg.active[0]) {
      for (std::size_t e = 0; e < n; ++e) rho[static_cast<Eigen::Index>(e)] = start[e].rho;
    }
    return rho;
  };
  const auto eval = [&](const Eigen::VectorXd& y) {
    Evaluation ev;
    const ElementField field = to_field(y);
    const Eigen::MatrixXd sens = design_sensitivity(fem, field, model, cfg.design, &ev.phi);
    const VolumeConstraint vol = volume_constraint(fem.volumes(), density_of(y), cfg.volume_target, cfg.design.transform);
    ev.g = vol.value;
    Eigen::MatrixXd sx(static_cast<Eigen::Index>(n), 5), vx(static_cast<Eigen::Index>(n), 5);
    for (std::size_t e = 0; e < n; ++e) {
      const auto r = static_cast<Eigen::Index>(e);
      sx.row(r) = sens.row(r).cwiseProduct(kScale.transpose());
      vx.row(r) = y.segment<5>(5 * r).transpose();
    }
    const Eigen::MatrixXd fx = filter.apply(vx, sx);
    ev.df.resize(n_var);
    ev.dg = Eigen::VectorXd::Zero(n_var);
    for (std::size_t e = 0; e < n; ++e) {
      const auto r = static_cast<Eigen::Index>(e);
      ev.df.segment<5>(5 * r) = fx.row(r).transpose();
      ev.dg[5 * r] = vol.gradient[r];
    }
    return ev;
  };
  const auto exact_volume = [&](const Eigen::VectorXd& y) {
    return volume_constraint(fem.volumes(), density_of(y), cfg.volume_target, cfg.design.transform).value;
  };

  DriveResult d = drive(x, cfg, eval, &frozen, exact_volume, progress);
  OptResult out;
  out.field = to_field(d.x);
  out.history = std::move(d.history);
  out.initial_compliance = d.phi0;
  out.final_compliance = d.at_x.phi;
  out.final_volume = d.at_x.g + cfg.volume_target;
  out.iterations = d.iterations;
  out.converged = d.converged;
  return out;
}

VoigtStiffness simp_stiffness(double rho, double penalty, const DesignSpaceConfig& cfg, VoigtStiffness* derivative) {
  const VoigtStiffness cs = base_material_stiffness(cfg.base);
  const VoigtStiffness c0 = cfg.stiffness_floor * cs;
  if (derivative) *derivative = penalty * std::pow(rho, penalty - 1.0) * (cs - c0);
  return c0 + std::pow(rho, penalty) * (cs - c0);
}

double simp_compliance(const MacroFem& fem, const Eigen::VectorXd& density, double penalty, const DesignSpaceConfig& cfg) {
  std::vector<VoigtStiffness> c(fem.element_count());
  for (std::size_t e = 0; e < c.size(); ++e) c[e] = simp_stiffness(density[static_cast<Eigen::Index>(e)], penalty, cfg);
  return fem.solve(c).total_compliance();
}

SimpResult simp_baseline(const MacroFem& fem, double penalty, const OptConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  if (!(penalty >= 1.0)) throw ConfigError("simp: penalty exponent must be at least 1");
  const std::size_t n = fem.element_count();
  const auto ni = static_cast<Eigen::Index>(n);
  double total_volume = 0.0;
  for (double v : fem.volumes()) total_volume += v;
  Eigen::VectorXd dg(ni);
  for (Eigen::Index e = 0; e < ni; ++e) dg[e] = fem.volumes()[static_cast<std::size_t>(e)] / total_volume;

  const SensitivityFilter filter(fem.centroids(), cfg.filter_radius, cfg.filter_epsilon);
  const auto eval = [&](const Eigen::VectorXd& y) {
    const Eigen::VectorXd rho = y.cwiseMax(0.0).cwiseMin(1.0);
    std::vector<VoigtStiffness> c(n);
    std::vector<std::array<Matrix6d, 1>> dc(n);
    for (std::size_t e = 0; e < n; ++e) c[e] = simp_stiffness(rho[static_cast<Eigen::Index>(e)], penalty, cfg.design, &dc[e][0]);
    const SolveResult r = fem.solve(c);
    Evaluation ev;
    ev.phi = r.total_compliance();
    ev.g = rho.dot(dg) - cfg.volume_target;
    ev.df = filter.apply(rho, compliance_sensitivity(fem, r, dc));
    ev.dg = dg;
    return ev;
  };

  DriveResult d = drive(Eigen::VectorXd::Constant(ni, cfg.volume_target), cfg, eval, nullptr, {}, progress);
  SimpResult out;
  out.density = d.x.cwiseMax(0.0).cwiseMin(1.0);
  out.history = std::move(d.history);
  out.initial_compliance = d.phi0;
  out.final_compliance = d.at_x.phi;
  out.final_volume = d.at_x.g + cfg.volume_target;
  out.iterations = d.iterations;
  out.converged = d.converged;
  return out;
}

ThresholdResult threshold_design(const ElementField& field, const std::vector<double>& volumes,
                                 const TransformConfig& cfg, double cut) {
  if (volumes.size() != field.size()) throw ConfigError("threshold: volumes do not match the field");
  if (cut < 0.0) cut = cfg.rho_min / 2.0;
  ThresholdResult out;
  out.field = field;
  out.volume_before = mean_transformed_density(volumes, field, cfg);
  for (auto& chi : out.field) {
    if (transform_rho(chi.rho, cfg) < cut) {
      if (chi.rho != 0.0) ++out.voided;
      chi.rho = 0.0;
    } else if (chi.rho < cfg.rho_min) {
      chi.rho = cfg.rho_min;
      ++out.projected;
    }
  }
  out.volume_after = mean_transformed_density(volumes, out.field, cfg);
  out.drift = out.volume_after - out.volume_before;
  return out;
}

}  // namespace spinodoid
