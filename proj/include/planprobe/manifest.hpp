#pragma once

// Run manifests written next to every CLI artifact as <artifact>.manifest.json.
// content_hash covers subcommand, flags, tool version and input/output
// digests; timestamps stay out of it so identical reruns hash identically.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "planprobe/error.hpp"
#include "planprobe/hash.hpp"
#include "planprobe/records.hpp"

namespace planprobe::manifest {

inline constexpr const char* kToolVersion = "0.1.0";

/// Digest of a file's content. JSONL record files hash their records without
/// timestamps.
inline std::string artifact_hash(const std::filesystem::path& path) {
  if (path.extension() == ".jsonl") {
    Sha256 h;
    for (const auto& r : records::load(path)) h.update_field(records::content_hash(r));
    return h.hex();
  }
  return sha256_file(path.string());
}

struct RunManifest {
  std::string subcommand;
  std::map<std::string, std::string> flags;  // sorted by key
  std::string tool_version = kToolVersion;
  std::map<std::string, std::string> input_hashes;   // path -> digest
  std::map<std::string, std::string> output_hashes;  // path -> digest
  std::vector<std::string> notes;
  std::string started_at;
  std::string finished_at;

  void add_input(const std::filesystem::path& p) { input_hashes[p.string()] = artifact_hash(p); }
  void add_output(const std::filesystem::path& p) { output_hashes[p.string()] = artifact_hash(p); }

  std::string content_hash() const {
    Sha256 h;
    h.update_field(subcommand).update_field(tool_version);
    for (const auto& [k, v] : flags) h.update_field(k).update_field(v);
    h.update_field("inputs");
    for (const auto& [k, v] : input_hashes) h.update_field(k).update_field(v);
    h.update_field("outputs");
    for (const auto& [k, v] : output_hashes) h.update_field(k).update_field(v);
    for (const auto& n : notes) h.update_field(n);
    return h.hex();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["tool_version"] = tool_version;
    j["flags"] = flags;
    j["inputs"] = input_hashes;
    j["outputs"] = output_hashes;
    j["notes"] = notes;
    j["content_hash"] = content_hash();
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    return j;
  }
};

inline std::filesystem::path manifest_path(const std::filesystem::path& artifact) {
  return artifact.string() + ".manifest.json";
}

inline void write(const RunManifest& m, const std::filesystem::path& artifact) {
  const auto path = manifest_path(artifact);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write " + path.string());
  out << m.to_json().dump(2) << '\n';
  if (!out) throw FileError("write failed for " + path.string());
}

}  // namespace planprobe::manifest
