#include "spinodoid/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "spinodoid/errors.hpp"
#include "spinodoid/vtk_io.hpp"

namespace spinodoid {

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported.
class Section {
 public:
  Section(const Json& j, std::string path) : path_(std::move(path)) {
    if (j.is_null()) {
      j_ = Json::object();
    } else if (!j.is_object()) {
      throw ConfigError(where() + " must be an object");
    } else {
      j_ = j;
    }
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  T get(const std::string& key, const T& fallback) {
    if (!has(key)) return fallback;
    return as<T>(j_.at(key), key);
  }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError(where(key) + " is required");
    return as<T>(j_.at(key), key);
  }

  Section child(const std::string& key) {
    has(key);
    return Section(j_.contains(key) ? j_.at(key) : Json(), where(key));
  }

  std::vector<Section> children(const std::string& key) {
    std::vector<Section> out;
    if (!has(key)) return out;
    const Json& arr = j_.at(key);
    if (!arr.is_array()) throw ConfigError(where(key) + " must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) out.emplace_back(arr[i], where(key) + "[" + std::to_string(i) + "]");
    return out;
  }

  Vec3 vec3(const std::string& key, const Vec3& fallback) {
    if (!has(key)) return fallback;
    const auto v = as<std::vector<double>>(j_.at(key), key);
    if (v.size() != 3) throw ConfigError(where(key) + " must have 3 entries");
    return {v[0], v[1], v[2]};
  }

  Box box(const std::string& key) {
    Section s = child(key);
    Box b{s.vec3("lo", Vec3::Zero()), s.vec3("hi", Vec3::Zero())};
    if (!s.has("lo") || !s.has("hi")) throw ConfigError(where(key) + " needs lo and hi");
    s.finish();
    if ((b.hi.array() < b.lo.array()).any()) throw ConfigError(where(key) + ": hi below lo");
    return b;
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) throw ConfigError("unknown config key '" + where(item.key()) + "'");
    }
  }

 private:
  template <class T>
  T as(const Json& v, const std::string& key) const {
    try {
      if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(where(key) + " must be an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && v.get<long long>() < 0) throw ConfigError(where(key) + " must be non-negative");
        }
      }
      return v.get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  Json j_;
  std::string path_;
  std::set<std::string> used_;
};

double beta_value(Section& s, double fallback) {
  const bool plain = s.has("beta");
  const bool over_pi = s.has("beta_over_pi");
  if (plain && over_pi) throw ConfigError(s.where() + ": give beta or beta_over_pi, not both");
  if (over_pi) return s.require<double>("beta_over_pi") * kPi;
  return s.get("beta", fallback);
}

SolverOptions solver_section(Section s, SolverOptions o) {
  o.kind = parse_solver_kind(s.get<std::string>("kind", to_string(o.kind)));
  o.relative_tolerance = s.get("tolerance", o.relative_tolerance);
  o.max_iterations = s.get("max_iterations", o.max_iterations);
  s.finish();
  if (!(o.relative_tolerance > 0.0) || o.max_iterations < 1) throw ConfigError(s.where() + ": invalid solver settings");
  return o;
}

std::array<int, 3> int3(Section& s, const std::string& key, std::array<int, 3> fallback) {
  if (!s.has(key)) return fallback;
  const auto v = s.require<std::vector<int>>(key);
  if (v.size() != 3) throw ConfigError(s.where(key) + " must have 3 entries");
  return {v[0], v[1], v[2]};
}

DesignParamsChi chi_section(Section s, DesignParamsChi c) {
  c.rho = s.get("rho", c.rho);
  if (s.has("theta_deg")) {
    const auto t = s.require<std::vector<double>>("theta_deg");
    if (t.size() != 3) throw ConfigError(s.where("theta_deg") + " must have 3 entries");
    c.theta1 = deg2rad(t[0]);
    c.theta2 = deg2rad(t[1]);
    c.theta3 = deg2rad(t[2]);
  }
  c.alpha = deg2rad(s.get("alpha_deg", rad2deg(c.alpha)));
  s.finish();
  return c;
}

std::filesystem::path io_path(Section& s, const std::string& key, const std::filesystem::path& base,
                              const std::filesystem::path& fallback = {}) {
  if (!s.has(key)) return fallback;
  std::filesystem::path p = s.require<std::string>(key);
  return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

void MacroConfig::validate() const {
  if (!((size.array() > 0.0).all())) throw ConfigError("macro.size must be positive");
  for (int d : divisions) {
    if (d < 1) throw ConfigError("macro.divisions must be positive");
  }
  if (supports.empty()) throw ConfigError("macro.supports must not be empty");
  if (load_cases.empty()) throw ConfigError("macro.load_cases must not be empty");
  for (const auto& lc : load_cases) {
    if (lc.points.empty() && lc.boxes.empty()) throw ConfigError("load case '" + lc.name + "' has no loads");
  }
}

TetMesh build_macro_mesh(const MacroConfig& cfg) {
  cfg.validate();
  const auto keep = [&](const Vec3& c) {
    for (const auto& b : cfg.exclude) {
      if (b.contains(c, 0.0)) return false;
    }
    return true;
  };
  TetMesh mesh = structured_box_mesh(cfg.size, cfg.divisions, cfg.origin, keep);
  if (mesh.element_count() == 0) throw ConfigError("macro: every cube is excluded");
  return mesh;
}

MacroProblem build_macro_problem(const MacroConfig& cfg) {
  MacroProblem p;
  p.mesh = build_macro_mesh(cfg);
  std::vector<int> pinned(p.mesh.node_count() * 3, -1);
  for (std::size_t s = 0; s < cfg.supports.size(); ++s) {
    const auto& sup = cfg.supports[s];
    const auto nodes = nodes_in_box(p.mesh, sup.box);
    if (nodes.empty()) throw ConfigError("macro.supports[" + std::to_string(s) + "] selects no node");
    for (int n : nodes) {
      for (int c = 0; c < 3; ++c) {
        if (!sup.fixed[c] || pinned[3 * n + c] >= 0) continue;
        pinned[3 * n + c] = static_cast<int>(p.dirichlet.size());
        p.dirichlet.push_back({n, c, sup.value[c]});
      }
    }
  }
  for (const auto& spec : cfg.load_cases) {
    LoadCase lc;
    lc.name = spec.name;
    auto add = [&](int node, const Vec3& f) {
      for (int c = 0; c < 3; ++c) {
        if (f[c] != 0.0) lc.forces.emplace_back(3 * node + c, f[c]);
      }
    };
    for (const auto& pl : spec.points) add(nearest_node(p.mesh, pl.point), pl.force);
    for (std::size_t b = 0; b < spec.boxes.size(); ++b) {
      const auto nodes = nodes_in_box(p.mesh, spec.boxes[b].box);
      if (nodes.empty()) {
        throw ConfigError("load case '" + spec.name + "' box load " + std::to_string(b) + " selects no node");
      }
      for (int n : nodes) add(n, spec.boxes[b].force / static_cast<double>(nodes.size()));
    }
    p.loads.push_back(std::move(lc));
  }
  p.validate();
  return p;
}

PipelineConfig parse_config(const Json& doc, const std::filesystem::path& base_dir) {
  PipelineConfig cfg;
  cfg.document = doc;
  Section root(doc, "");
  cfg.seed = root.get<std::uint64_t>("seed", 0);

  {
    Section grf = root.child("grf");
    cfg.dataset.beta = beta_value(grf, cfg.dataset.beta);
    cfg.dataset.n_waves = grf.get("n_waves", cfg.dataset.n_waves);
    cfg.dataset.rve_length = grf.get("rve_length", cfg.dataset.rve_length);
    grf.finish();
  }
  {
    Section h = root.child("homogenize");
    auto& d = cfg.dataset;
    d.resolution = h.get("resolution", d.resolution);
    d.material.youngs_modulus = h.get("youngs_modulus", d.material.youngs_modulus);
    d.material.poisson_ratio = h.get("poisson_ratio", d.material.poisson_ratio);
    d.homogenize.remove_islands = h.get("remove_islands", d.homogenize.remove_islands);
    d.homogenize.solver = solver_section(h.child("solver"), d.homogenize.solver);
    Section s = h.child("sampling");
    d.plan.rho_lo = s.get("rho_lo", d.plan.rho_lo);
    d.plan.rho_hi = s.get("rho_hi", d.plan.rho_hi);
    d.plan.theta_lo_deg = s.get("theta_lo_deg", d.plan.theta_lo_deg);
    d.plan.theta_hi_deg = s.get("theta_hi_deg", d.plan.theta_hi_deg);
    d.plan.zero_angle_probability = s.get("zero_angle_probability", d.plan.zero_angle_probability);
    s.finish();
    h.finish();
    d.seed = cfg.seed;
  }
  {
    Section s = root.child("surrogate");
    auto& t = cfg.train;
    t.dims = s.get("dims", t.dims);
    t.learning_rate = s.get("learning_rate", t.learning_rate);
    t.beta1 = s.get("beta1", t.beta1);
    t.beta2 = s.get("beta2", t.beta2);
    t.adam_epsilon = s.get("adam_epsilon", t.adam_epsilon);
    t.batch_size = s.get("batch_size", t.batch_size);
    t.epochs = s.get("epochs", t.epochs);
    t.validation_fraction = s.get("validation_fraction", t.validation_fraction);
    t.void_anchor_fraction = s.get("void_anchor_fraction", t.void_anchor_fraction);
    t.void_rho_max = s.get("void_rho_max", t.void_rho_max);
    cfg.r2_threshold = s.get("r2_threshold", cfg.r2_threshold);
    s.finish();
    t.seed = cfg.seed;
  }
  {
    Section s = root.child("design_space");
    auto& d = cfg.design;
    d.transform.lambda1 = s.get("lambda1", d.transform.lambda1);
    d.transform.lambda2 = s.get("lambda2", d.transform.lambda2);
    d.transform.rho_min = s.get("rho_min", d.transform.rho_min);
    d.transform.theta_min = deg2rad(s.get("theta_min_deg", rad2deg(d.transform.theta_min)));
    d.stiffness_floor = s.get("stiffness_floor", d.stiffness_floor);
    d.void_gate = s.get("void_gate", d.void_gate);
    d.void_gate_lo = s.get("void_gate_lo", d.void_gate_lo);
    d.void_gate_hi = s.get("void_gate_hi", d.void_gate_hi);
    d.spectral_floor = s.get("spectral_floor", d.spectral_floor);
    s.finish();
    d.base = cfg.dataset.material;
  }
  {
    Section m = root.child("macro");
    auto& mc = cfg.macro;
    mc.size = m.vec3("size", mc.size);
    mc.divisions = int3(m, "divisions", mc.divisions);
    mc.origin = m.vec3("origin", mc.origin);
    for (auto& e : m.children("exclude")) {
      mc.exclude.push_back({e.vec3("lo", Vec3::Zero()), e.vec3("hi", Vec3::Zero())});
      e.finish();
    }
    for (auto& s : m.children("supports")) {
      SupportSpec sup;
      sup.box = s.box("box");
      if (s.has("fixed")) {
        const auto f = s.require<std::vector<bool>>("fixed");
        if (f.size() != 3) throw ConfigError(s.where("fixed") + " must have 3 entries");
        sup.fixed = {f[0], f[1], f[2]};
      }
      sup.value = s.vec3("value", sup.value);
      s.finish();
      mc.supports.push_back(sup);
    }
    for (auto& l : m.children("load_cases")) {
      LoadCaseSpec lc;
      lc.name = l.get<std::string>("name", "load" + std::to_string(mc.load_cases.size()));
      for (auto& p : l.children("point_loads")) {
        lc.points.push_back({p.vec3("point", Vec3::Zero()), p.vec3("force", Vec3::Zero())});
        if (!p.has("point") || !p.has("force")) throw ConfigError(p.where() + " needs point and force");
        p.finish();
      }
      for (auto& b : l.children("box_loads")) {
        BoxLoadSpec bl;
        bl.box = b.box("box");
        bl.force = b.vec3("force", Vec3::Zero());
        b.finish();
        lc.boxes.push_back(bl);
      }
      l.finish();
      mc.load_cases.push_back(std::move(lc));
    }
    mc.solver = solver_section(m.child("solver"), mc.solver);
    m.finish();
  }
  {
    Section s = root.child("optimizer");
    auto& o = cfg.optimizer;
    o.max_iterations = s.get("max_iterations", o.max_iterations);
    o.mma.move_limit = s.get("move_limit", o.mma.move_limit);
    o.min_move_limit = s.get("min_move_limit", o.min_move_limit);
    o.accept_tolerance = s.get("accept_tolerance", o.accept_tolerance);
    o.tolerance = s.get("tolerance", o.tolerance);
    o.tolerance_window = s.get("tolerance_window", o.tolerance_window);
    o.feasibility_tolerance = s.get("feasibility_tolerance", o.feasibility_tolerance);
    o.volume_target = s.get("volume_target", o.volume_target);
    o.filter_radius = s.get("filter_radius", o.filter_radius);
    o.filter_epsilon = s.get("filter_epsilon", o.filter_epsilon);
    o.initial = chi_section(s.child("initial"), o.initial);
    if (s.has("active")) {
      const auto a = s.require<std::vector<bool>>("active");
      if (a.size() != 5) throw ConfigError(s.where("active") + " must have 5 entries");
      std::copy(a.begin(), a.end(), o.active.begin());
    }
    cfg.simp_penalty = s.get("simp_penalty", cfg.simp_penalty);
    cfg.threshold_cut = s.get("threshold_cut", cfg.threshold_cut);
    s.finish();
    o.design = cfg.design;
  }
  {
    Section s = root.child("resolver");
    auto& r = cfg.resolver;
    r.beta = beta_value(s, r.beta);
    r.kappa = s.get("kappa", r.kappa);
    r.q_min = s.get("q_min", r.q_min);
    r.n_waves = s.get("n_waves", r.n_waves);
    r.resolution = int3(s, "resolution", r.resolution);
    r.seed_policy = parse_seed_policy(s.get<std::string>("seed_policy", "per-element"));
    r.voxel_budget = s.get("voxel_budget", r.voxel_budget);
    r.min_support = s.get("min_support", r.min_support);
    cfg.resolver_binary = s.get("binary", cfg.resolver_binary);
    if (s.has("region")) cfg.resolver_region = s.box("region");
    s.finish();
    r.seed = cfg.seed;
    r.transform = cfg.design.transform;
  }
  {
    Section s = root.child("elasticity_surface");
    cfg.surface_directions = s.get("directions", cfg.surface_directions);
    s.finish();
    if (cfg.surface_directions < 1) throw ConfigError("elasticity_surface.directions must be positive");
  }
  {
    Section s = root.child("io");
    cfg.io.dataset = io_path(s, "dataset", base_dir);
    cfg.io.checkpoint = io_path(s, "checkpoint", base_dir);
    cfg.io.field = io_path(s, "field", base_dir);
    cfg.io.out_dir = io_path(s, "out_dir", base_dir, cfg.io.out_dir);
    s.finish();
  }
  root.finish();

  cfg.dataset.validate();
  cfg.train.validate();
  cfg.design.validate();
  cfg.macro.validate();
  cfg.optimizer.validate();
  cfg.resolver.validate();
  if (!(cfg.simp_penalty >= 1.0)) throw ConfigError("optimizer.simp_penalty must be at least 1");
  if (!(cfg.r2_threshold <= 1.0)) throw ConfigError("surrogate.r2_threshold must not exceed 1");
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  Json doc;
  try {
    doc = read_json_file(path);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  if (!doc.is_object()) throw ConfigError(path.string() + ": top level must be an object");
  if (seed_override) doc["seed"] = *seed_override;
  return parse_config(doc, path.parent_path());
}

Box parse_region(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--region: '" + item + "' is not a number");
    }
  }
  if (v.size() != 6) throw ConfigError("--region expects x0,y0,z0,x1,y1,z1");
  Box b{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
  if (!((b.hi.array() > b.lo.array()).all())) throw ConfigError("--region: upper corner must exceed lower corner");
  return b;
}

void write_field_csv(const std::filesystem::path& path, const ElementField& field) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "element,rho,theta1,theta2,theta3,alpha\n";
    for (std::size_t e = 0; e < field.size(); ++e) {
      const auto& c = field[e];
      out << e << ',' << format_double(c.rho) << ',' << format_double(c.theta1) << ',' << format_double(c.theta2)
          << ',' << format_double(c.theta3) << ',' << format_double(c.alpha) << '\n';
    }
    if (!out) throw ConfigError("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

ElementField read_field_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open field file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "element,rho,theta1,theta2,theta3,alpha") {
    throw ParseError(path.string() + ":1: unexpected field header");
  }
  ElementField field;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": column " + std::to_string(col) +
                         " is not a number");
      }
    }
    if (v.size() != 6) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 6 columns");
    if (static_cast<std::size_t>(v[0]) != field.size()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": element indices must be consecutive");
    }
    DesignParamsChi c{v[1], v[2], v[3], v[4], v[5]};
    try {
      c.validate();
    } catch (const Error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    field.push_back(c);
  }
  return field;
}

void write_history_csv(const std::filesystem::path& path, const OptHistory& history) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "iteration,compliance,volume_constraint,max_change,accepted\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out << i << ',' << format_double(history.compliance[i]) << ',' << format_double(history.volume[i]) << ','
        << format_double(history.max_change[i]) << ',' << (history.accepted[i] ? 1 : 0) << '\n';
  }
}

void write_field_vtk(const std::filesystem::path& path, const TetMesh& mesh, const ElementField& field,
                     const TransformConfig& cfg) {
  if (field.size() != mesh.element_count()) throw ConfigError("field size does not match the mesh");
  std::map<std::string, std::vector<double>> data;
  for (const auto& c : field) {
    data["rho"].push_back(c.rho);
    data["theta1"].push_back(c.theta1);
    data["theta2"].push_back(c.theta2);
    data["theta3"].push_back(c.theta3);
    data["alpha"].push_back(c.alpha);
    data["rho_transformed"].push_back(transform_rho(c.rho, cfg));
  }
  write_vtk_tet_mesh(path, mesh, data);
}

}  // namespace spinodoid
