#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "spinodoid/elasticity.hpp"
#include "spinodoid/homogenizer.hpp"
#include "spinodoid/metadata.hpp"
#include "spinodoid/spinodoid_gen.hpp"

namespace spinodoid {

// Random admissible design parameters. Angles are drawn in degrees so the
// values written to CSV are exactly the values that were simulated.
struct SamplingPlan {
  double rho_lo = kRhoMin;
  double rho_hi = 1.0;
  double theta_lo_deg = 30.0;
  double theta_hi_deg = 90.0;
  double zero_angle_probability = 0.5;  // per angle; all-zero draws are redrawn

  void validate() const;
};

struct DatasetSpec {
  SamplingPlan plan;
  int resolution = 32;
  double beta = 10.0 * kPi;
  double rve_length = 1.0;
  int n_waves = kDefaultWaveCount;
  BaseMaterial material;
  HomogenizeOptions homogenize;
  std::uint64_t seed = 0;

  void validate() const;
  Json to_json() const;
};

struct DatasetRow {
  long index = 0;
  double rho = 0.0;
  std::array<double, 3> theta_deg{0.0, 0.0, 0.0};
  OrthotropicNine moduli = OrthotropicNine::Zero();
  double remainder_norm = 0.0;  // discarded non-orthotropic part
  double solid_fraction = 0.0;
  int islands_removed = 0;
  bool regularized = false;
};

// In-memory training table: inputs (rho, theta1..3 in radians) and moduli.
struct Dataset {
  std::vector<Vector4d> inputs;
  std::vector<OrthotropicNine> outputs;

  std::size_t size() const { return inputs.size(); }
};

DesignParamsTheta to_design(const DatasetRow& row);

// Parameters of sample `index`; a pure function of (plan, master seed, index).
DatasetRow sample_row_parameters(const SamplingPlan& plan, std::uint64_t seed, long index);

// Topology + homogenization of one sample. Throws on failure.
DatasetRow compute_dataset_row(const DatasetSpec& spec, long index);

std::string dataset_csv_header();
std::string format_dataset_row(const DatasetRow& row);

// Parses a dataset CSV (angles in degrees) into radians. ParseError names the
// offending line and column.
Dataset read_dataset_csv(const std::filesystem::path& path);

enum class ExistingOutput { kRefuse, kResume, kOverwrite };

struct DatasetReport {
  long rows = 0;
  long skipped = 0;
  long next_index = 0;
  bool resumed = false;
};

// Streams rows to `out` in sample-index order until `count` rows exist.
// Failed samples are logged and skipped. Progress lives in the sidecar so an
// interrupted run can resume; a trailing partial line is discarded.
DatasetReport generate_dataset(const DatasetSpec& spec, long count, const std::filesystem::path& out,
                               ExistingOutput existing, int workers, const Json& run_meta,
                               const std::function<void(const std::string&)>& log = {});

}  // namespace spinodoid
