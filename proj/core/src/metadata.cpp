#include "spinodoid/metadata.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spinodoid/errors.hpp"
#include "spinodoid/rng.hpp"

namespace spinodoid {

std::string_view library_version() { return SPINODOID_VERSION; }

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const Json& config) { return fnv1a_hex(config.dump()); }

std::filesystem::path sidecar_path(const std::filesystem::path& artifact) {
  return artifact.string() + ".meta.json";
}

Json artifact_metadata(std::string_view kind, const Json& config) {
  Json meta;
  meta["kind"] = kind;
  meta["library"] = "spinodoid";
  meta["version"] = library_version();
  meta["rng"] = Rng::kAlgorithm;
  meta["config_hash"] = config_hash(config);
  return meta;
}

void write_json_file(const std::filesystem::path& path, const Json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << doc.dump(2) << '\n';
    if (!out) throw ConfigError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return Json::parse(buf.str());
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_sidecar(const std::filesystem::path& artifact, const Json& meta) {
  write_json_file(sidecar_path(artifact), meta);
}

Json read_sidecar(const std::filesystem::path& artifact) { return read_json_file(sidecar_path(artifact)); }

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace spinodoid
