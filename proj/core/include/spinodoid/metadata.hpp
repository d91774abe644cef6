#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

namespace spinodoid {

using Json = nlohmann::json;

std::string_view library_version();

// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

// Hash of the canonical (sorted-key, compact) serialization.
std::string config_hash(const Json& config);

// `<artifact>.meta.json`
std::filesystem::path sidecar_path(const std::filesystem::path& artifact);

// Common sidecar fields: kind, library version, RNG identity, config hash.
// Deliberately carries no timestamps so reruns are byte-identical.
Json artifact_metadata(std::string_view kind, const Json& config);

void write_json_file(const std::filesystem::path& path, const Json& doc);
Json read_json_file(const std::filesystem::path& path);

void write_sidecar(const std::filesystem::path& artifact, const Json& meta);
Json read_sidecar(const std::filesystem::path& artifact);

// Shortest round-trip decimal for a double.
std::string format_double(double v);

}  // namespace spinodoid
