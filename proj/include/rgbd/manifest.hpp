#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rgbd {

inline constexpr const char* kVersion = "0.1.0";

// Every CLI run drops a manifest beside its outputs: the effective config,
// the seeds, and a hash of the config text. Re-running from the manifest
// must reproduce the outputs bit for bit.
struct RunManifest {
  std::string command;
  std::string config_json;  // effective config, canonical dump
  std::vector<uint64_t> seeds;
  std::string config_hash;  // fnv1a-64 of config_json, hex
  std::string version = kVersion;
};

std::string config_hash_hex(const std::string& config_json);
void write_manifest(const RunManifest& manifest, const std::string& path);
RunManifest load_manifest(const std::string& path);

}  // namespace rgbd
