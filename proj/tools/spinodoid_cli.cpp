// spinodoid: command-line driver for the two-scale pipeline.

#include <CLI11.hpp>
#include <Eigen/Core>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "spinodoid/config.hpp"
#include "spinodoid/dataset.hpp"
#include "spinodoid/errors.hpp"
#include "spinodoid/homogenizer.hpp"
#include "spinodoid/optimizer.hpp"
#include "spinodoid/resolver.hpp"
#include "spinodoid/surrogate.hpp"
#include "spinodoid/vtk_io.hpp"

namespace fs = std::filesystem;
using namespace spinodoid;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out;
  std::string region;
};

Json versions() {
  return Json{{"spinodoid", library_version()},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"cli11", CLI11_VERSION}};
}

Json run_metadata(const std::string& kind, const PipelineConfig& cfg, const std::string& command) {
  Json meta = artifact_metadata(kind, cfg.document);
  meta["command"] = command;
  meta["seeds"] = {{"master", cfg.seed}};
  meta["versions"] = versions();
  meta["config"] = cfg.document;
  return meta;
}

void log(const std::string& msg) { std::cerr << msg << std::endl; }

PipelineConfig load(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  return load_config(g.config, g.seed);
}

fs::path out_dir(const Globals& g, const PipelineConfig& cfg) {
  const fs::path dir = g.out.empty() ? cfg.io.out_dir : fs::path(g.out);
  fs::create_directories(dir);
  return dir;
}

// Explicit flag, then the configured io path.
fs::path input_path(const std::string& flag, const fs::path& configured, const std::string& what) {
  const fs::path p = flag.empty() ? configured : fs::path(flag);
  if (p.empty()) throw ConfigError("no " + what + " given (flag or io section)");
  if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
  return p;
}

DesignParamsTheta design_from_flags(double rho, const std::string& theta_deg) {
  std::array<double, 3> t{};
  try {
    std::stringstream ss(theta_deg);
    std::string item;
    int n = 0;
    while (std::getline(ss, item, ',')) {
      if (n == 3) throw std::invalid_argument(item);
      std::size_t used = 0;
      t[n++] = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    }
    if (n != 3) throw std::invalid_argument(theta_deg);
  } catch (const std::exception&) {
    throw ConfigError("--theta expects three angles in degrees, e.g. 90,90,90");
  }
  DesignParamsTheta p{rho, deg2rad(t[0]), deg2rad(t[1]), deg2rad(t[2])};
  p.validate();
  return p;
}

std::optional<Box> region_of(const Globals& g, const PipelineConfig& cfg) {
  if (!g.region.empty()) return parse_region(g.region);
  return cfg.resolver_region;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

// ---- subcommands ----------------------------------------------------------

int cmd_gen_dataset(const Globals& g, long count, bool resume, bool overwrite) {
  const PipelineConfig cfg = load(g);
  if (count < 0) throw ConfigError("--count must be non-negative");
  if (resume && overwrite) throw ConfigError("--resume and --overwrite are exclusive");
  fs::path out;
  if (!g.out.empty()) {
    out = out_dir(g, cfg) / "dataset.csv";
  } else if (!cfg.io.dataset.empty()) {
    out = cfg.io.dataset;
  } else {
    out = out_dir(g, cfg) / "dataset.csv";
  }
  const auto mode = resume ? ExistingOutput::kResume : overwrite ? ExistingOutput::kOverwrite : ExistingOutput::kRefuse;
  Json meta = run_metadata("dataset", cfg, "gen-dataset");
  const auto report = generate_dataset(cfg.dataset, count, out, mode, g.workers, meta, log);
  std::cout << "dataset: " << out.string() << " rows=" << report.rows << " skipped=" << report.skipped
            << (report.resumed ? " (resumed)" : "") << "\n";
  const Dataset check = read_dataset_csv(out);
  if (static_cast<long>(check.size()) != count) {
    throw NumericalError("dataset row count " + std::to_string(check.size()) + " != requested " +
                         std::to_string(count));
  }
  return 0;
}

int cmd_train(const Globals& g, const std::string& dataset_flag) {
  const PipelineConfig cfg = load(g);
  const fs::path data_path = input_path(dataset_flag, cfg.io.dataset, "dataset");
  const Dataset data = read_dataset_csv(data_path);
  log("train: " + std::to_string(data.size()) + " samples from " + data_path.string());
  TrainReport report;
  MlpModel model = train_surrogate(data, cfg.train, &report);

  fs::path out;
  if (!g.out.empty() || cfg.io.checkpoint.empty()) {
    out = out_dir(g, cfg) / "model.json";
  } else {
    out = cfg.io.checkpoint;
  }
  Json meta = run_metadata("checkpoint", cfg, "train");
  meta["dataset"] = {{"path", data_path.filename().string()}, {"rows", data.size()}};
  try {
    meta["dataset"]["hash"] = read_sidecar(data_path).value("dataset_hash", "");
  } catch (const Error&) {
  }
  model.meta = Json{{"train", cfg.train.to_json()}, {"dataset_rows", data.size()}};
  save_model(model, out);
  write_sidecar(out, meta);

  const double r2min = report.validation_r2.min_defined();
  const bool pass = r2min >= cfg.r2_threshold;
  Json rep{{"n_train", report.n_train},
           {"n_validation", report.n_validation},
           {"n_anchors", report.n_anchors},
           {"final_train_loss", report.train_loss.empty() ? 0.0 : report.train_loss.back()},
           {"final_validation_loss", report.validation_loss.empty() ? 0.0 : report.validation_loss.back()},
           {"train_loss", report.train_loss},
           {"validation_loss", report.validation_loss},
           {"validation_r2", std::vector<double>(report.validation_r2.r2.data(),
                                                 report.validation_r2.r2.data() + report.validation_r2.r2.size())},
           {"validation_r2_min", r2min},
           {"r2_threshold", cfg.r2_threshold},
           {"gate_passed", pass}};
  const fs::path rep_path = out.parent_path() / (out.stem().string() + "_report.json");
  write_json_file(rep_path, rep);
  write_sidecar(rep_path, run_metadata("train_report", cfg, "train"));
  std::cout << "checkpoint: " << out.string() << "\n";
  std::cout << "validation R2 per component:";
  for (Eigen::Index i = 0; i < report.validation_r2.r2.size(); ++i) std::cout << ' ' << report.validation_r2.r2[i];
  std::cout << "\nR2 gate: min " << r2min << (pass ? " >= " : " < ") << cfg.r2_threshold
            << (pass ? " PASS" : " FAIL") << "\n";
  return 0;
}

int cmd_eval(const Globals& g, const std::string& checkpoint_flag, const std::string& dataset_flag) {
  const PipelineConfig cfg = load(g);
  const MlpModel model = load_model(input_path(checkpoint_flag, cfg.io.checkpoint, "checkpoint"), cfg.train.dims);
  const fs::path data_path = input_path(dataset_flag, cfg.io.dataset, "dataset");
  const Dataset data = read_dataset_csv(data_path);
  const auto [train_idx, val_idx] = split_indices(data.size(), cfg.train.validation_fraction, cfg.train.seed);
  Dataset val;
  for (auto i : val_idx) {
    val.inputs.push_back(data.inputs[i]);
    val.outputs.push_back(data.outputs[i]);
  }
  const R2Result all = evaluate_r2(model, data);
  const R2Result held = evaluate_r2(model, val);
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  Json rep{{"rows", data.size()},
           {"validation_rows", val.size()},
           {"r2_all", vec(all.r2)},
           {"r2_validation", vec(held.r2)},
           {"r2_validation_min", held.min_defined()},
           {"r2_threshold", cfg.r2_threshold}};
  const fs::path out = out_dir(g, cfg) / "eval.json";
  write_json_file(out, rep);
  write_sidecar(out, run_metadata("eval", cfg, "eval"));
  std::cout << "R2 (validation split) min " << held.min_defined() << ", all rows min " << all.min_defined() << "\n";
  return 0;
}

int cmd_homogenize(const Globals& g, double rho, const std::string& theta, bool vtk) {
  const PipelineConfig cfg = load(g);
  const DesignParamsTheta p = design_from_flags(rho, theta);
  const int r = cfg.dataset.resolution;
  const VoxelGrid grid = generate_voxel_topology(p, cfg.dataset.beta, {r, r, r}, cfg.seed,
                                                 {cfg.dataset.n_waves, cfg.dataset.rve_length});
  const HomogenizeResult h = homogenize(grid, cfg.dataset.material, cfg.dataset.homogenize);
  const OrthotropicSplit split = extract_orthotropic(h.stiffness);
  const fs::path dir = out_dir(g, cfg);
  Json doc{{"rho", p.rho},
           {"theta_deg", {rad2deg(p.theta1), rad2deg(p.theta2), rad2deg(p.theta3)}},
           {"resolution", r},
           {"stiffness", matrix_json(h.stiffness)},
           {"orthotropic", std::vector<double>(split.moduli.data(), split.moduli.data() + 9)},
           {"remainder_norm", split.remainder_norm},
           {"solid_fraction", h.solid_fraction},
           {"kept_fraction", h.kept_fraction},
           {"islands_removed", h.islands_removed},
           {"regularized", h.regularized},
           {"max_relative_residual", h.max_relative_residual}};
  write_json_file(dir / "homogenize.json", doc);
  write_sidecar(dir / "homogenize.json", run_metadata("homogenization", cfg, "homogenize"));
  if (vtk) {
    write_vtk_structured_points(dir / "topology.vtk", grid, true);
    write_sidecar(dir / "topology.vtk", run_metadata("voxel_topology", cfg, "homogenize"));
  }
  std::cout << "solid fraction " << h.solid_fraction << "\nC =\n" << h.stiffness << "\n";
  return 0;
}

MacroFem make_fem(const PipelineConfig& cfg) { return MacroFem(build_macro_problem(cfg.macro), cfg.macro.solver); }

int cmd_optimize(const Globals& g, const std::string& checkpoint_flag, bool simp, bool dry_run) {
  const PipelineConfig cfg = load(g);
  const MacroProblem problem = build_macro_problem(cfg.macro);
  std::optional<MlpModel> model;
  if (!simp) model = load_model(input_path(checkpoint_flag, cfg.io.checkpoint, "checkpoint"), cfg.train.dims);
  if (dry_run) {
    std::cout << "config ok: " << problem.mesh.element_count() << " elements, " << problem.mesh.node_count()
              << " nodes, " << problem.dirichlet.size() << " prescribed dofs, " << problem.loads.size()
              << " load case(s)" << (simp ? ", SIMP p=" + format_double(cfg.simp_penalty) : "") << "\n";
    return 0;
  }
  const MacroFem fem(problem, cfg.macro.solver);
  const fs::path dir = out_dir(g, cfg);
  auto progress = [](int it, double phi, double viol) {
    if (it % 10 == 0) {
      log("iter " + std::to_string(it) + " compliance " + format_double(phi) + " volume-target " + format_double(viol));
    }
  };

  if (simp) {
    const SimpResult r = simp_baseline(fem, cfg.simp_penalty, cfg.optimizer, progress);
    {
      std::ofstream out(dir / "simp_density.csv");
      out << "element,rho\n";
      for (Eigen::Index e = 0; e < r.density.size(); ++e) out << e << ',' << format_double(r.density[e]) << '\n';
    }
    write_sidecar(dir / "simp_density.csv", run_metadata("simp_density", cfg, "optimize --simp"));
    write_history_csv(dir / "simp_history.csv", r.history);
    write_sidecar(dir / "simp_history.csv", run_metadata("simp_history", cfg, "optimize --simp"));
    write_vtk_tet_mesh(dir / "simp_density.vtk", problem.mesh,
                       {{"rho", std::vector<double>(r.density.data(), r.density.data() + r.density.size())}});
    write_sidecar(dir / "simp_density.vtk", run_metadata("simp_density_vtk", cfg, "optimize --simp"));
    const Json summary{{"method", "simp"},
                       {"penalty", cfg.simp_penalty},
                       {"initial_compliance", r.initial_compliance},
                       {"final_compliance", r.final_compliance},
                       {"final_volume", r.final_volume},
                       {"iterations", r.iterations},
                       {"converged", r.converged},
                       {"elements", problem.mesh.element_count()},
                       {"config", cfg.document}};
    write_json_file(dir / "simp_summary.json", summary);
    write_sidecar(dir / "simp_summary.json", run_metadata("simp_summary", cfg, "optimize --simp"));
    std::cout << "SIMP compliance " << r.initial_compliance << " -> " << r.final_compliance << " in "
              << r.iterations << " iterations" << (r.converged ? " (converged)" : " (iteration limit)")
              << ", volume " << r.final_volume << "\n";
    return 0;
  }

  const OptResult r = minimize_compliance(fem, *model, cfg.optimizer, nullptr, progress);
  write_field_csv(dir / "field.csv", r.field);
  write_sidecar(dir / "field.csv", run_metadata("element_field", cfg, "optimize"));
  write_field_vtk(dir / "field.vtk", problem.mesh, r.field, cfg.design.transform);
  write_sidecar(dir / "field.vtk", run_metadata("element_field_vtk", cfg, "optimize"));
  write_history_csv(dir / "history.csv", r.history);
  write_sidecar(dir / "history.csv", run_metadata("history", cfg, "optimize"));
  const Json summary{{"method", "spinodoid"},
                     {"initial_compliance", r.initial_compliance},
                     {"final_compliance", r.final_compliance},
                     {"final_volume", r.final_volume},
                     {"iterations", r.iterations},
                     {"converged", r.converged},
                     {"elements", problem.mesh.element_count()},
                     {"config", cfg.document}};
  write_json_file(dir / "summary.json", summary);
  write_sidecar(dir / "summary.json", run_metadata("summary", cfg, "optimize"));
  std::cout << "compliance " << r.initial_compliance << " -> " << r.final_compliance << " in " << r.iterations
            << " iterations" << (r.converged ? " (converged)" : " (iteration limit)") << ", volume "
            << r.final_volume << "\n";
  return 0;
}

int cmd_threshold(const Globals& g, const std::string& field_flag, std::optional<double> cut_flag) {
  const PipelineConfig cfg = load(g);
  const TetMesh mesh = build_macro_mesh(cfg.macro);
  const ElementField field = read_field_csv(input_path(field_flag, cfg.io.field, "field"));
  if (field.size() != mesh.element_count()) throw ConfigError("field size does not match the configured mesh");
  std::vector<double> volumes(mesh.element_count());
  for (std::size_t e = 0; e < volumes.size(); ++e) volumes[e] = mesh.element_volume(e);
  const ThresholdResult t =
      threshold_design(field, volumes, cfg.design.transform, cut_flag.value_or(cfg.threshold_cut));
  const fs::path dir = out_dir(g, cfg);
  write_field_csv(dir / "field_thresholded.csv", t.field);
  write_sidecar(dir / "field_thresholded.csv", run_metadata("element_field", cfg, "threshold"));
  write_field_vtk(dir / "field_thresholded.vtk", mesh, t.field, cfg.design.transform);
  write_sidecar(dir / "field_thresholded.vtk", run_metadata("element_field_vtk", cfg, "threshold"));
  Json doc{{"volume_before", t.volume_before}, {"volume_after", t.volume_after}, {"drift", t.drift},
           {"voided", t.voided},               {"projected", t.projected}};
  if (!cfg.io.checkpoint.empty() && fs::exists(cfg.io.checkpoint)) {
    const MlpModel model = load_model(cfg.io.checkpoint, cfg.train.dims);
    const MacroFem fem = make_fem(cfg);
    doc["compliance_before"] = evaluate_compliance(fem, field, model, cfg.design);
    doc["compliance_after"] = evaluate_compliance(fem, t.field, model, cfg.design);
  }
  write_json_file(dir / "threshold.json", doc);
  write_sidecar(dir / "threshold.json", run_metadata("threshold_report", cfg, "threshold"));
  std::cout << "threshold: voided " << t.voided << ", projected " << t.projected << ", volume " << t.volume_before
            << " -> " << t.volume_after << "\n";
  return 0;
}

int cmd_resolve(const Globals& g, const std::string& field_flag, std::optional<bool> ascii) {
  PipelineConfig cfg = load(g);
  cfg.resolver.workers = g.workers;
  const TetMesh mesh = build_macro_mesh(cfg.macro);
  const ElementField field = read_field_csv(input_path(field_flag, cfg.io.field, "field"));
  if (field.size() != mesh.element_count()) throw ConfigError("field size does not match the configured mesh");
  const auto region = region_of(g, cfg);
  const bool binary = ascii ? !*ascii : cfg.resolver_binary;
  const fs::path dir = out_dir(g, cfg);
  const fs::path out = dir / "resolved.vtk";
  const ResolveStats s = resolve_to_vtk(mesh, field, cfg.resolver, region, out, binary, [](int k, int n) {
    if (k % 16 == 0 || k == n) log("resolve: slab " + std::to_string(k) + "/" + std::to_string(n));
  });
  Json meta = run_metadata("resolved_structure", cfg, "resolve");
  meta["region"] = region ? Json{region->lo[0], region->lo[1], region->lo[2], region->hi[0], region->hi[1],
                                 region->hi[2]}
                          : Json(nullptr);
  meta["resolver"] = cfg.resolver.to_json();
  meta["kappa"] = s.kappa;
  meta["mean_centroid_spacing"] = s.mean_spacing;
  meta["solid_fraction"] = s.solid_fraction();
  meta["field_mean_density"] = mean_field_density(mesh, field, cfg.design.transform, region);
  write_sidecar(out, meta);
  std::cout << "resolved " << s.total_voxels << " voxels, solid fraction " << s.solid_fraction() << " -> "
            << out.string() << "\n";
  return 0;
}

int cmd_elasticity_surface(const Globals& g, const std::string& checkpoint_flag, const std::string& source,
                           double rho, const std::string& theta, double alpha_deg) {
  const PipelineConfig cfg = load(g);
  const DesignParamsTheta p = design_from_flags(rho, theta);
  VoigtStiffness c;
  if (source == "surrogate") {
    const MlpModel model = load_model(input_path(checkpoint_flag, cfg.io.checkpoint, "checkpoint"), cfg.train.dims);
    c = expand_orthotropic(predict_moduli(model, Vector4d(p.rho, p.theta1, p.theta2, p.theta3)));
  } else if (source == "homogenize") {
    const int r = cfg.dataset.resolution;
    const VoxelGrid grid = generate_voxel_topology(p, cfg.dataset.beta, {r, r, r}, cfg.seed,
                                                   {cfg.dataset.n_waves, cfg.dataset.rve_length});
    c = homogenize(grid, cfg.dataset.material, cfg.dataset.homogenize).stiffness;
  } else {
    throw ConfigError("--source must be surrogate or homogenize");
  }
  const Matrix6d t = rotation_matrix_voigt(deg2rad(alpha_deg));
  c = t * c * t.transpose();
  const fs::path out = out_dir(g, cfg) / "elasticity_surface.csv";
  {
    std::ofstream f(out);
    if (!f) throw ConfigError("cannot write " + out.string());
    f << "dx,dy,dz,E\n";
    for (const Vec3& d : sphere_directions(cfg.surface_directions)) {
      f << format_double(d.x()) << ',' << format_double(d.y()) << ',' << format_double(d.z()) << ','
        << format_double(youngs_modulus(c, d)) << '\n';
    }
  }
  Json meta = run_metadata("elasticity_surface", cfg, "elasticity-surface");
  meta["source"] = source;
  meta["design"] = {{"rho", p.rho},
                    {"theta_deg", {rad2deg(p.theta1), rad2deg(p.theta2), rad2deg(p.theta3)}},
                    {"alpha_deg", alpha_deg}};
  write_sidecar(out, meta);
  std::cout << "elasticity surface (" << cfg.surface_directions << " directions) -> " << out.string() << "\n";
  return 0;
}

int cmd_export(const Globals& g, const std::string& field_flag) {
  const PipelineConfig cfg = load(g);
  const TetMesh mesh = build_macro_mesh(cfg.macro);
  ElementField field;
  if (!field_flag.empty() || !cfg.io.field.empty()) {
    field = read_field_csv(input_path(field_flag, cfg.io.field, "field"));
    if (field.size() != mesh.element_count()) throw ConfigError("field size does not match the configured mesh");
  } else {
    field.assign(mesh.element_count(), cfg.optimizer.initial);
  }
  const fs::path out = out_dir(g, cfg) / "export.vtk";
  write_field_vtk(out, mesh, field, cfg.design.transform);
  write_sidecar(out, run_metadata("element_field_vtk", cfg, "export"));
  std::cout << "exported " << mesh.element_count() << " elements -> " << out.string() << "\n";
  return 0;
}

int default_workers() {
  if (const char* env = std::getenv("SPINODOID_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("SPINODOID_WORKERS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spinodoid: two-scale topology optimization with spinodoid microstructures"};
  app.require_subcommand(1);
  Globals g;
  try {
    g.workers = default_workers();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  app.add_option("--config", g.config, "Pipeline configuration (JSON)");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--workers", g.workers, "Worker threads (default: SPINODOID_WORKERS or 1)")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--region", g.region, "Sub-box x0,y0,z0,x1,y1,z1");

  std::string dataset, checkpoint, field, theta = "90,90,90", source = "surrogate";
  long count = 2000;
  bool resume = false, overwrite = false, simp = false, dry_run = false, vtk = false, ascii = false;
  double rho = 0.5, alpha_deg = 0.0;
  double cut = -1.0;

  auto* gen = app.add_subcommand("gen-dataset", "Sample designs, homogenize, and write the training table");
  gen->add_option("--count", count, "Number of rows")->capture_default_str();
  gen->add_flag("--resume", resume, "Continue a partial dataset");
  gen->add_flag("--overwrite", overwrite, "Replace an existing dataset");

  auto* train = app.add_subcommand("train", "Train the surrogate");
  train->add_option("--dataset", dataset, "Dataset CSV (default: io.dataset)");

  auto* eval = app.add_subcommand("eval", "R2 of a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint);
  eval->add_option("--dataset", dataset);

  auto* hom = app.add_subcommand("homogenize", "Generate and homogenize one spinodoid RVE");
  hom->add_option("--rho", rho)->capture_default_str();
  hom->add_option("--theta", theta, "Cone angles in degrees")->capture_default_str();
  hom->add_flag("--vtk", vtk, "Also write the voxel topology");

  auto* opt = app.add_subcommand("optimize", "Compliance minimization");
  opt->add_option("--checkpoint", checkpoint);
  opt->add_flag("--simp", simp, "Run the single-scale SIMP baseline instead");
  opt->add_flag("--dry-run", dry_run, "Validate the configuration and inputs without solving");

  auto* thr = app.add_subcommand("threshold", "Push an optimized field onto the admissible set");
  thr->add_option("--field", field);
  auto* cut_opt = thr->add_option("--cut", cut, "rho' cut (default rho_min / 2)");

  auto* res = app.add_subcommand("resolve", "Synthesize the fully resolved graded microstructure");
  res->add_option("--field", field);
  auto* ascii_opt = res->add_flag("--ascii", ascii, "Write ASCII instead of binary VTK");

  auto* surf = app.add_subcommand("elasticity-surface", "Directional Young's modulus over the sphere");
  surf->add_option("--checkpoint", checkpoint);
  surf->add_option("--source", source, "surrogate or homogenize")->capture_default_str();
  surf->add_option("--rho", rho)->capture_default_str();
  surf->add_option("--theta", theta, "Cone angles in degrees")->capture_default_str();
  surf->add_option("--alpha", alpha_deg, "Rotation about e3 in degrees")->capture_default_str();

  auto* exp = app.add_subcommand("export", "Write mesh and element field as VTK");
  exp->add_option("--field", field);

  for (auto* sub : {gen, train, eval, hom, opt, thr, res, surf, exp}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_dataset(g, count, resume, overwrite);
    if (*train) return cmd_train(g, dataset);
    if (*eval) return cmd_eval(g, checkpoint, dataset);
    if (*hom) return cmd_homogenize(g, rho, theta, vtk);
    if (*opt) return cmd_optimize(g, checkpoint, simp, dry_run);
    if (*thr) return cmd_threshold(g, field, cut_opt->count() ? std::optional<double>(cut) : std::nullopt);
    if (*res) return cmd_resolve(g, field, ascii_opt->count() ? std::optional<bool>(ascii) : std::nullopt);
    if (*surf) return cmd_elasticity_surface(g, checkpoint, source, rho, theta, alpha_deg);
    if (*exp) return cmd_export(g, field);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
