#include "spinodoid/macro_fem.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "spinodoid/errors.hpp"

namespace spinodoid {

void MacroProblem::validate() const {
  mesh.validate();
  if (dirichlet.empty()) throw ConfigError("macro problem: at least one Dirichlet condition is required");
  const int n_dof = 3 * static_cast<int>(mesh.node_count());
  for (const auto& d : dirichlet) {
    if (d.node < 0 || d.node >= static_cast<int>(mesh.node_count()) || d.component < 0 || d.component > 2) {
      throw ConfigError("macro problem: Dirichlet condition on invalid node/component");
    }
  }
  if (loads.empty()) throw ConfigError("macro problem: at least one load case is required");
  for (const auto& lc : loads) {
    for (const auto& [dof, v] : lc.forces) {
      if (dof < 0 || dof >= n_dof || !std::isfinite(v)) {
        throw ConfigError("macro problem: load case '" + lc.name + "' has an invalid force entry");
      }
    }
  }
}

Eigen::VectorXd MacroProblem::force_vector(std::size_t i) const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(3 * static_cast<Eigen::Index>(mesh.node_count()));
  for (const auto& [dof, v] : loads.at(i).forces) f[dof] += v;
  return f;
}

TetGeometry tet_geometry(const std::array<Vec3, 4>& x) {
  Eigen::Matrix4d m;
  for (int a = 0; a < 4; ++a) m.row(a) << 1.0, x[a].x(), x[a].y(), x[a].z();
  TetGeometry g;
  g.volume = m.determinant() / 6.0;
  const double scale = (x[1] - x[0]).norm() * (x[2] - x[0]).norm() * (x[3] - x[0]).norm();
  if (!(g.volume > 1e-14 * scale)) {
    throw DomainError("tetrahedron is inverted or degenerate (volume " + std::to_string(g.volume) + ")");
  }
  // Column a of inv(m) holds the coefficients of shape function N_a.
  const Eigen::Matrix4d inv = m.inverse();
  for (int a = 0; a < 4; ++a) {
    const double dx = inv(1, a), dy = inv(2, a), dz = inv(3, a);
    const int c = 3 * a;
    g.b(0, c) = dx;
    g.b(1, c + 1) = dy;
    g.b(2, c + 2) = dz;
    g.b(3, c + 1) = dz;
    g.b(3, c + 2) = dy;
    g.b(4, c) = dz;
    g.b(4, c + 2) = dx;
    g.b(5, c) = dy;
    g.b(5, c + 1) = dx;
  }
  return g;
}

Matrix12d element_stiffness(const TetGeometry& geo, const VoigtStiffness& c) {
  Matrix12d k = geo.volume * geo.b.transpose() * c * geo.b;
  return 0.5 * (k + k.transpose());
}

Matrix12d element_stiffness(const std::array<Vec3, 4>& x, const VoigtStiffness& c) {
  return element_stiffness(tet_geometry(x), c);
}

double SolveResult::total_compliance() const {
  double s = 0.0;
  for (double c : compliance) s += c;
  return s;
}

double compliance(const SolveResult& result) { return result.total_compliance(); }
double objective_multi_load(const SolveResult& result) { return result.total_compliance(); }

MacroFem::MacroFem(MacroProblem problem, SolverOptions solver) : problem_(std::move(problem)), solver_(solver) {
  problem_.validate();
  const auto& mesh = problem_.mesh;
  const std::size_t n_el = mesh.element_count();
  geometry_.reserve(n_el);
  for (std::size_t e = 0; e < n_el; ++e) {
    geometry_.push_back(tet_geometry(mesh.element_nodes(e)));
    volumes_.push_back(geometry_.back().volume);
    centroids_.push_back(mesh.centroid(e));
  }
  const int n_dof = 3 * static_cast<int>(mesh.node_count());
  free_index_.assign(n_dof, 0);
  prescribed_ = Eigen::VectorXd::Zero(n_dof);
  for (const auto& d : problem_.dirichlet) {
    free_index_[3 * d.node + d.component] = -1;
    prescribed_[3 * d.node + d.component] = d.value;
  }
  for (int& f : free_index_) {
    if (f == 0) f = n_free_++;
  }
  if (n_free_ == 0) throw ConfigError("macro problem: every degree of freedom is constrained");

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n_el * 144);
  for (std::size_t e = 0; e < n_el; ++e) {
    const auto& t = mesh.tets[e];
    for (int a = 0; a < 12; ++a) {
      const int fa = free_index_[3 * t[a / 3] + a % 3];
      if (fa < 0) continue;
      for (int b = 0; b < 12; ++b) {
        const int fb = free_index_[3 * t[b / 3] + b % 3];
        if (fb >= 0) trip.emplace_back(fa, fb, 1.0);
      }
    }
  }
  pattern_.resize(n_free_, n_free_);
  pattern_.setFromTriplets(trip.begin(), trip.end());
  pattern_.makeCompressed();

  scatter_.assign(n_el * 144, -1);
  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  for (std::size_t e = 0; e < n_el; ++e) {
    const auto& t = mesh.tets[e];
    for (int a = 0; a < 12; ++a) {
      const int fa = free_index_[3 * t[a / 3] + a % 3];
      if (fa < 0) continue;
      for (int b = 0; b < 12; ++b) {
        const int fb = free_index_[3 * t[b / 3] + b % 3];
        if (fb < 0) continue;
        // Entry (row fa, column fb) in column-major storage.
        const int* lo = inner + outer[fb];
        const int* hi = inner + outer[fb + 1];
        const int* pos = std::lower_bound(lo, hi, fa);
        scatter_[e * 144 + 12 * a + b] = static_cast<int>(pos - inner);
      }
    }
  }
}

SolveResult MacroFem::solve(const std::vector<VoigtStiffness>& c) const {
  const auto& mesh = problem_.mesh;
  if (c.size() != geometry_.size()) throw ConfigError("macro solve: one stiffness per element is required");
  SparseMatrix k = pattern_;
  std::fill(k.valuePtr(), k.valuePtr() + k.nonZeros(), 0.0);
  double* values = k.valuePtr();
  const std::size_t n_cases = problem_.loads.size();
  std::vector<Eigen::VectorXd> rhs(n_cases, Eigen::VectorXd::Zero(n_free_));
  std::vector<Eigen::VectorXd> f_full(n_cases);
  for (std::size_t lc = 0; lc < n_cases; ++lc) {
    f_full[lc] = problem_.force_vector(lc);
    for (std::size_t g = 0; g < free_index_.size(); ++g) {
      if (free_index_[g] >= 0) rhs[lc][free_index_[g]] = f_full[lc][static_cast<Eigen::Index>(g)];
    }
  }
  const bool has_prescribed = prescribed_.cwiseAbs().maxCoeff() > 0.0;
  for (std::size_t e = 0; e < geometry_.size(); ++e) {
    const Matrix12d ke = element_stiffness(geometry_[e], c[e]);
    const int* slots = scatter_.data() + e * 144;
    for (int a = 0; a < 12; ++a) {
      for (int b = 0; b < 12; ++b) {
        if (slots[12 * a + b] >= 0) values[slots[12 * a + b]] += ke(a, b);
      }
    }
    if (!has_prescribed) continue;
    const auto& t = mesh.tets[e];
    for (int a = 0; a < 12; ++a) {
      const int fa = free_index_[3 * t[a / 3] + a % 3];
      if (fa < 0) continue;
      for (int b = 0; b < 12; ++b) {
        const int gb = 3 * t[b / 3] + b % 3;
        if (free_index_[gb] < 0 && prescribed_[gb] != 0.0) {
          for (auto& r : rhs) r[fa] -= ke(a, b) * prescribed_[gb];
        }
      }
    }
  }

  SolveResult out;
  SpdSolver solver(k, solver_);
  out.regularized = solver.regularized();
  for (std::size_t lc = 0; lc < n_cases; ++lc) {
    SolveStats stats;
    const Eigen::VectorXd uf = solver.solve(rhs[lc], &stats);
    Eigen::VectorXd u = prescribed_;
    for (std::size_t g = 0; g < free_index_.size(); ++g) {
      if (free_index_[g] >= 0) u[static_cast<Eigen::Index>(g)] = uf[free_index_[g]];
    }
    out.compliance.push_back(u.dot(f_full[lc]));
    out.relative_residual.push_back(stats.relative_residual);
    out.u.push_back(std::move(u));
  }
  return out;
}

Vector6d MacroFem::element_strain(const SolveResult& result, std::size_t lc, std::size_t e) const {
  const auto& t = problem_.mesh.tets[e];
  Eigen::Matrix<double, 12, 1> ue;
  for (int a = 0; a < 4; ++a) ue.segment<3>(3 * a) = result.u[lc].segment<3>(3 * t[a]);
  return geometry_[e].b * ue;
}

double MacroFem::strain_energy_product(const SolveResult& result, std::size_t lc,
                                       const std::vector<VoigtStiffness>& c) const {
  double s = 0.0;
  for (std::size_t e = 0; e < geometry_.size(); ++e) {
    const Vector6d eps = element_strain(result, lc, e);
    s += volumes_[e] * eps.dot(c[e] * eps);
  }
  return s;
}

SensitivityFilter::SensitivityFilter(const std::vector<Vec3>& centroids, double radius, double epsilon)
    : radius_(radius), epsilon_(epsilon) {
  if (!(radius >= 0.0)) throw ConfigError("filter: radius must be non-negative");
  if (!(epsilon > 0.0)) throw ConfigError("filter: epsilon must be positive");
  const std::size_t n = centroids.size();
  offsets_.assign(n + 1, 0);
  weight_sums_.assign(n, 0.0);
  if (radius == 0.0) return;

  // Uniform bucket grid with cell size r; neighbors lie in adjacent buckets.
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  for (const auto& c : centroids) lo = lo.cwiseMin(c);
  auto key = [&](const Vec3& p) {
    const Eigen::Vector3i q = ((p - lo) / radius).array().floor().cast<int>();
    return std::array<int, 3>{q.x(), q.y(), q.z()};
  };
  auto hash = [](const std::array<int, 3>& k) {
    return (static_cast<std::int64_t>(k[0]) * 73856093) ^ (static_cast<std::int64_t>(k[1]) * 19349663) ^
           (static_cast<std::int64_t>(k[2]) * 83492791);
  };
  std::unordered_map<std::int64_t, std::vector<int>> buckets;
  for (std::size_t e = 0; e < n; ++e) buckets[hash(key(centroids[e]))].push_back(static_cast<int>(e));
  for (std::size_t e = 0; e < n; ++e) {
    const auto k = key(centroids[e]);
    std::vector<std::pair<int, double>> found;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const auto it = buckets.find(hash({k[0] + dx, k[1] + dy, k[2] + dz}));
          if (it == buckets.end()) continue;
          for (int f : it->second) {
            const double w = radius - (centroids[e] - centroids[f]).norm();
            if (w > 0.0) found.emplace_back(f, w);
          }
        }
    // Hash collisions can repeat a bucket; keep each neighbor once, in index order.
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end(),
                            [](const auto& a, const auto& b) { return a.first == b.first; }),
                found.end());
    for (const auto& [f, w] : found) {
      neighbors_.push_back(f);
      weights_.push_back(w);
      weight_sums_[e] += w;
    }
    offsets_[e + 1] = neighbors_.size();
  }
}

Eigen::MatrixXd SensitivityFilter::apply(const Eigen::MatrixXd& values, const Eigen::MatrixXd& sens) const {
  if (radius_ == 0.0) return sens;
  const Eigen::Index n = sens.rows();
  Eigen::MatrixXd out(n, sens.cols());
  for (Eigen::Index j = 0; j < sens.cols(); ++j) {
    for (Eigen::Index e = 0; e < n; ++e) {
      double num = 0.0;
      for (std::size_t p = offsets_[e]; p < offsets_[e + 1]; ++p) {
        const int f = neighbors_[p];
        num += weights_[p] * values(f, j) * sens(f, j);
      }
      out(e, j) = num / (std::max(values(e, j), epsilon_) * weight_sums_[e]);
    }
  }
  return out;
}

Eigen::MatrixXd filter_sensitivities(const std::vector<Vec3>& centroids, const Eigen::MatrixXd& values,
                                     const Eigen::MatrixXd& sens, double radius, double epsilon) {
  return SensitivityFilter(centroids, radius, epsilon).apply(values, sens);
}

VolumeConstraint volume_constraint(const std::vector<double>& volumes, const Eigen::VectorXd& rho, double rho_bar,
                                   const TransformConfig& cfg) {
  double total = 0.0;
  for (double v : volumes) total += v;
  VolumeConstraint out;
  out.gradient.resize(rho.size());
  double acc = 0.0;
  for (Eigen::Index e = 0; e < rho.size(); ++e) {
    double d = 0.0;
    acc += volumes[e] * transform_rho(rho[e], cfg, &d);
    out.gradient[e] = volumes[e] * d / total;
  }
  out.value = acc / total - rho_bar;
  return out;
}

}  // namespace spinodoid
