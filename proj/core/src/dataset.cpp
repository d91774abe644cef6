#include "spinodoid/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

#include "spinodoid/errors.hpp"
#include "spinodoid/rng.hpp"

namespace spinodoid {

namespace {

constexpr const char* kColumns[] = {"rho",   "theta1", "theta2", "theta3", "C1111",
                                    "C1122", "C1133",  "C2222",  "C2233",  "C3333",
                                    "C2323", "C3131",  "C1212"};

double parse_field(const std::string& text, const std::filesystem::path& path, long line,
                   int column) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": column '" +
                     kColumns[column] + "' is not a number: '" + text + "'");
  }
  return v;
}

// Returns the complete data lines of an existing dataset (header checked).
std::vector<std::string> read_complete_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (true) {
    const std::size_t nl = content.find('\n', start);
    if (nl == std::string::npos) break;  // trailing partial line is dropped
    lines.push_back(content.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty() || lines.front() != dataset_csv_header()) {
    throw ParseError(path.string() + ": missing or unexpected dataset header");
  }
  lines.erase(lines.begin());
  return lines;
}

}  // namespace

void SamplingPlan::validate() const {
  if (!(rho_lo > 0.0 && rho_lo <= rho_hi && rho_hi <= 1.0)) {
    throw ConfigError("sampling plan: need 0 < rho_lo <= rho_hi <= 1");
  }
  if (!(theta_lo_deg > 0.0 && theta_lo_deg <= theta_hi_deg && theta_hi_deg <= 90.0)) {
    throw ConfigError("sampling plan: need 0 < theta_lo <= theta_hi <= 90 degrees");
  }
  if (!(zero_angle_probability >= 0.0 && zero_angle_probability < 1.0)) {
    throw ConfigError("sampling plan: zero_angle_probability must lie in [0, 1)");
  }
}

void DatasetSpec::validate() const {
  plan.validate();
  if (resolution < 8) throw ConfigError("dataset: resolution must be at least 8");
  if (!(beta > 0.0) || !(rve_length > 0.0)) throw ConfigError("dataset: beta and rve_length must be positive");
  if (n_waves < 1) throw ConfigError("dataset: n_waves must be at least 1");
  material.validate();
}

Json DatasetSpec::to_json() const {
  return Json{{"sampling",
               {{"rho", {plan.rho_lo, plan.rho_hi}},
                {"theta_deg", {plan.theta_lo_deg, plan.theta_hi_deg}},
                {"zero_angle_probability", plan.zero_angle_probability}}},
              {"resolution", resolution},
              {"beta", beta},
              {"rve_length", rve_length},
              {"n_waves", n_waves},
              {"material", {{"E", material.youngs_modulus}, {"nu", material.poisson_ratio}}},
              {"solver",
               {{"kind", to_string(homogenize.solver.kind)},
                {"relative_tolerance", homogenize.solver.relative_tolerance},
                {"max_iterations", homogenize.solver.max_iterations}}},
              {"remove_islands", homogenize.remove_islands},
              {"boundary_conditions", "affine (kinematic uniform); upper-bound estimate"},
              {"seed", seed}};
}

DesignParamsTheta to_design(const DatasetRow& row) {
  return {row.rho, deg2rad(row.theta_deg[0]), deg2rad(row.theta_deg[1]), deg2rad(row.theta_deg[2])};
}

DatasetRow sample_row_parameters(const SamplingPlan& plan, std::uint64_t seed, long index) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index), 0));
  DatasetRow row;
  row.index = index;
  row.rho = rng.uniform(plan.rho_lo, plan.rho_hi);
  do {
    for (double& t : row.theta_deg) {
      t = rng.uniform() < plan.zero_angle_probability
              ? 0.0
              : rng.uniform(plan.theta_lo_deg, plan.theta_hi_deg);
    }
  } while (row.theta_deg[0] == 0.0 && row.theta_deg[1] == 0.0 && row.theta_deg[2] == 0.0);
  return row;
}

DatasetRow compute_dataset_row(const DatasetSpec& spec, long index) {
  DatasetRow row = sample_row_parameters(spec.plan, spec.seed, index);
  TopologyOptions topo;
  topo.n_waves = spec.n_waves;
  topo.rve_length = spec.rve_length;
  const int n = spec.resolution;
  const VoxelGrid grid = generate_voxel_topology(to_design(row), spec.beta, {n, n, n},
                                                 derive_seed(spec.seed, static_cast<std::uint64_t>(index), 1), topo);
  const HomogenizeResult h = homogenize(grid, spec.material, spec.homogenize);
  const OrthotropicSplit split = extract_orthotropic(h.stiffness);
  row.moduli = split.moduli;
  row.remainder_norm = split.remainder_norm;
  row.solid_fraction = h.solid_fraction;
  row.islands_removed = h.islands_removed;
  row.regularized = h.regularized;
  return row;
}

std::string dataset_csv_header() {
  std::string h;
  for (const char* c : kColumns) {
    if (!h.empty()) h += ',';
    h += c;
  }
  return h;
}

std::string format_dataset_row(const DatasetRow& row) {
  std::string s = format_double(row.rho);
  for (double t : row.theta_deg) s += ',' + format_double(t);
  for (int k = 0; k < 9; ++k) s += ',' + format_double(row.moduli[k]);
  return s;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("dataset not found: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != dataset_csv_header()) {
    throw ParseError(path.string() + ":1: expected header '" + dataset_csv_header() + "'");
  }
  Dataset data;
  long line_no = 1;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    fields.clear();
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 13) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 13 columns, got " +
                       std::to_string(fields.size()));
    }
    Vector4d x;
    OrthotropicNine y;
    for (int c = 0; c < 13; ++c) {
      const double v = parse_field(fields[c], path, line_no, c);
      if (c == 0) x[0] = v;
      else if (c < 4) x[c] = deg2rad(v);
      else y[c - 4] = v;
    }
    data.inputs.push_back(x);
    data.outputs.push_back(y);
  }
  return data;
}

DatasetReport generate_dataset(const DatasetSpec& spec, long count, const std::filesystem::path& out,
                               ExistingOutput existing, int workers, const Json& run_meta,
                               const std::function<void(const std::string&)>& log) {
  spec.validate();
  if (count < 0) throw ConfigError("dataset: count must be non-negative");
  workers = std::max(1, workers);
  const Json spec_json = spec.to_json();
  Json meta = run_meta;
  meta["dataset"] = spec_json;
  meta["dataset_hash"] = config_hash(spec_json);
  meta["rng"] = Rng::kAlgorithm;
  meta["columns"] = dataset_csv_header();
  meta["angle_units"] = "degrees";
  meta["seeds"] = {{"master", spec.seed},
                   {"per_sample", "derive_seed(master, index, 0) parameters; derive_seed(master, index, 1) topology"}};

  DatasetReport report;
  Json skipped = Json::array();
  std::vector<std::string> kept;
  if (std::filesystem::exists(out)) {
    if (existing == ExistingOutput::kRefuse) {
      throw ConfigError("dataset " + out.string() + " exists; pass --resume or --overwrite");
    }
    if (existing == ExistingOutput::kResume) {
      const Json old = read_sidecar(out);
      if (old.value("dataset_hash", std::string()) != meta["dataset_hash"].get<std::string>()) {
        throw ConfigError("cannot resume " + out.string() + ": dataset settings differ from the partial run");
      }
      const auto& prog = old.at("progress");
      report.rows = prog.at("rows").get<long>();
      report.skipped = prog.at("skipped").get<long>();
      report.next_index = prog.at("next_index").get<long>();
      skipped = old.value("skipped_samples", Json::array());
      kept = read_complete_lines(out);
      if (static_cast<long>(kept.size()) < report.rows) {
        throw ParseError(out.string() + ": fewer rows than recorded in the sidecar; cannot resume");
      }
      kept.resize(report.rows);
      report.resumed = true;
    }
  }
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + out.string());
    f << dataset_csv_header() << '\n';
    for (const auto& l : kept) f << l << '\n';
  }

  auto write_progress = [&]() {
    meta["progress"] = {{"rows", report.rows}, {"skipped", report.skipped}, {"next_index", report.next_index},
                        {"target_rows", count}, {"complete", report.rows >= count}};
    meta["skipped_samples"] = skipped;
    write_sidecar(out, meta);
  };
  write_progress();

  std::ofstream f(out, std::ios::app);
  while (report.rows < count) {
    const long batch = std::min<long>(workers, count - report.rows);
    std::vector<DatasetRow> rows(batch);
    std::vector<std::string> errors(batch);
    auto work = [&](long b) {
      try {
        rows[b] = compute_dataset_row(spec, report.next_index + b);
      } catch (const std::exception& e) {
        errors[b] = e.what();
      }
    };
    if (batch == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (long b = 0; b < batch; ++b) pool.emplace_back(work, b);
      for (auto& t : pool) t.join();
    }
    for (long b = 0; b < batch; ++b) {
      const long index = report.next_index + b;
      if (!errors[b].empty()) {
        ++report.skipped;
        skipped.push_back({{"index", index}, {"reason", errors[b]}});
        if (log) log("sample " + std::to_string(index) + " skipped: " + errors[b]);
        continue;
      }
      f << format_dataset_row(rows[b]) << '\n';
      ++report.rows;
    }
    f.flush();
    report.next_index += batch;
    write_progress();
    if (log && report.rows % 50 == 0) {
      log("dataset: " + std::to_string(report.rows) + "/" + std::to_string(count) + " rows");
    }
  }
  return report;
}

}  // namespace spinodoid
