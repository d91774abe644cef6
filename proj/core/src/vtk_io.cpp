#include "spinodoid/vtk_io.hpp"

#include <iomanip>
#include <sstream>

#include "spinodoid/errors.hpp"
#include "spinodoid/metadata.hpp"

namespace spinodoid {

StructuredPointsWriter::StructuredPointsWriter(const std::filesystem::path& path, std::array<int, 3> dims,
                                               const Vec3& origin, const Vec3& spacing, bool binary,
                                               const std::string& title)
    : binary_(binary) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw ConfigError("cannot write " + path.string());
  expected_ = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  out_ << "# vtk DataFile Version 3.0\n"
       << title << '\n'
       << (binary ? "BINARY" : "ASCII") << '\n'
       << "DATASET STRUCTURED_POINTS\n"
       << "DIMENSIONS " << dims[0] + 1 << ' ' << dims[1] + 1 << ' ' << dims[2] + 1 << '\n'
       << "ORIGIN " << format_double(origin.x()) << ' ' << format_double(origin.y()) << ' '
       << format_double(origin.z()) << '\n'
       << "SPACING " << format_double(spacing.x()) << ' ' << format_double(spacing.y()) << ' '
       << format_double(spacing.z()) << '\n'
       << "CELL_DATA " << expected_ << '\n'
       << "SCALARS xi unsigned_char 1\n"
       << "LOOKUP_TABLE default\n";
}

void StructuredPointsWriter::write(const std::uint8_t* cells, std::size_t count) {
  if (written_ + count > expected_) throw ConfigError("vtk writer: more cells than declared");
  if (binary_) {
    out_.write(reinterpret_cast<const char*>(cells), static_cast<std::streamsize>(count));
  } else {
    std::string line;
    line.reserve(2 * count);
    for (std::size_t i = 0; i < count; ++i) {
      line += static_cast<char>('0' + (cells[i] ? 1 : 0));
      line += ((written_ + i + 1) % 32 == 0) ? '\n' : ' ';
    }
    out_ << line;
  }
  written_ += count;
}

void StructuredPointsWriter::close() {
  if (closed_) return;
  closed_ = true;
  if (written_ != expected_) throw ConfigError("vtk writer: closed before all cells were written");
  out_ << '\n';
  out_.close();
  if (!out_) throw ConfigError("vtk writer: write failed");
}

StructuredPointsWriter::~StructuredPointsWriter() {
  if (!closed_ && out_.is_open()) out_.close();
}

void write_vtk_structured_points(const std::filesystem::path& path, const VoxelGrid& grid, bool binary) {
  grid.validate();
  StructuredPointsWriter w(path, grid.dims, grid.origin, grid.spacing, binary);
  w.write(grid.data.data(), grid.data.size());
  w.close();
}

VoxelGrid read_vtk_structured_points(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw ParseError(path.string() + ": missing " + what);
    return line;
  };
  next("version line");
  next("title");
  const std::string mode = next("format");
  const bool binary = mode == "BINARY";
  if (!binary && mode != "ASCII") throw ParseError(path.string() + ": unknown format '" + mode + "'");
  if (next("dataset") != "DATASET STRUCTURED_POINTS") throw ParseError(path.string() + ": not STRUCTURED_POINTS");
  VoxelGrid g;
  std::string key;
  {
    std::istringstream s(next("DIMENSIONS"));
    int px, py, pz;
    if (!(s >> key >> px >> py >> pz) || key != "DIMENSIONS") throw ParseError(path.string() + ": bad DIMENSIONS");
    g.dims = {px - 1, py - 1, pz - 1};
  }
  {
    std::istringstream s(next("ORIGIN"));
    if (!(s >> key >> g.origin.x() >> g.origin.y() >> g.origin.z()) || key != "ORIGIN") {
      throw ParseError(path.string() + ": bad ORIGIN");
    }
  }
  {
    std::istringstream s(next("SPACING"));
    if (!(s >> key >> g.spacing.x() >> g.spacing.y() >> g.spacing.z()) || key != "SPACING") {
      throw ParseError(path.string() + ": bad SPACING");
    }
  }
  next("CELL_DATA");
  next("SCALARS");
  next("LOOKUP_TABLE");
  const std::size_t n = static_cast<std::size_t>(g.dims[0]) * g.dims[1] * g.dims[2];
  g.data.resize(n);
  if (binary) {
    in.read(reinterpret_cast<char*>(g.data.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw ParseError(path.string() + ": truncated cell data");
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      int v;
      if (!(in >> v)) throw ParseError(path.string() + ": truncated cell data");
      g.data[i] = static_cast<std::uint8_t>(v != 0);
    }
  }
  g.validate();
  return g;
}

void write_vtk_tet_mesh(const std::filesystem::path& path, const TetMesh& mesh,
                        const std::map<std::string, std::vector<double>>& cell_data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "# vtk DataFile Version 3.0\nspinodoid macroscale design\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.node_count() << " double\n";
  for (const auto& p : mesh.nodes) {
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
  }
  out << "CELLS " << mesh.element_count() << ' ' << 5 * mesh.element_count() << '\n';
  for (const auto& t : mesh.tets) out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  out << "CELL_TYPES " << mesh.element_count() << '\n';
  for (std::size_t e = 0; e < mesh.element_count(); ++e) out << "10\n";
  if (!cell_data.empty()) out << "CELL_DATA " << mesh.element_count() << '\n';
  for (const auto& [name, values] : cell_data) {
    if (values.size() != mesh.element_count()) {
      throw ConfigError("vtk writer: array '" + name + "' has the wrong length");
    }
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : values) out << format_double(v) << '\n';
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

}  // namespace spinodoid
