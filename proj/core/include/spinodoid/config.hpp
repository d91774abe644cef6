#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spinodoid/dataset.hpp"
#include "spinodoid/macro_fem.hpp"
#include "spinodoid/metadata.hpp"
#include "spinodoid/optimizer.hpp"
#include "spinodoid/resolver.hpp"
#include "spinodoid/surrogate.hpp"

namespace spinodoid {

// Node-selection predicates are axis-aligned boxes (inclusive, 1e-9 slack).
struct SupportSpec {
  Box box;
  std::array<bool, 3> fixed{true, true, true};
  Vec3 value = Vec3::Zero();
};

// A point load goes to the node nearest `point`; a box load is split evenly
// over the nodes inside the box.
struct PointLoadSpec {
  Vec3 point = Vec3::Zero();
  Vec3 force = Vec3::Zero();
};

struct BoxLoadSpec {
  Box box;
  Vec3 force = Vec3::Zero();  // total
};

struct LoadCaseSpec {
  std::string name;
  std::vector<PointLoadSpec> points;
  std::vector<BoxLoadSpec> boxes;
};

struct MacroConfig {
  Vec3 size{1.5, 1.0, 0.1};
  std::array<int, 3> divisions{32, 24, 2};
  Vec3 origin = Vec3::Zero();
  std::vector<Box> exclude;  // cubes whose center lies in any box are removed
  std::vector<SupportSpec> supports;
  std::vector<LoadCaseSpec> load_cases;
  SolverOptions solver;

  void validate() const;
};

TetMesh build_macro_mesh(const MacroConfig& cfg);
// Throws ConfigError when a support or box load selects no node.
MacroProblem build_macro_problem(const MacroConfig& cfg);

struct IoConfig {
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
  std::filesystem::path field;
  std::filesystem::path out_dir = ".";
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  DatasetSpec dataset;          // grf + homogenize sections
  TrainConfig train;
  double r2_threshold = 0.95;
  DesignSpaceConfig design;
  MacroConfig macro;
  OptConfig optimizer;          // optimizer.design mirrors `design`
  double simp_penalty = 4.0;
  double threshold_cut = -1.0;  // < 0: rho_min / 2
  ResolveConfig resolver;
  bool resolver_binary = true;
  std::optional<Box> resolver_region;
  int surface_directions = 500;
  IoConfig io;

  // Canonical document after defaults and overrides; hashed into sidecars.
  Json document;

  std::string hash() const { return config_hash(document); }
};

// Parses and validates a pipeline document. Unknown keys, wrong types and
// out-of-range values raise ConfigError naming the offending key. Relative
// io paths resolve against `base_dir`.
PipelineConfig parse_config(const Json& doc, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt);

// "x0,y0,z0,x1,y1,z1"
Box parse_region(const std::string& text);

// Element field persistence: CSV with header element,rho,theta1,theta2,theta3,alpha
// (radians, shortest round-trip decimals).
void write_field_csv(const std::filesystem::path& path, const ElementField& field);
ElementField read_field_csv(const std::filesystem::path& path);
void write_history_csv(const std::filesystem::path& path, const OptHistory& history);
// Mesh with cell arrays rho, theta1..3, alpha (radians) and rho_transformed.
void write_field_vtk(const std::filesystem::path& path, const TetMesh& mesh, const ElementField& field,
                     const TransformConfig& cfg);

}  // namespace spinodoid
