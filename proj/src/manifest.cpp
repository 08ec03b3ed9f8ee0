#include "rgbd/manifest.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "rgbd/common.hpp"

namespace rgbd {

std::string config_hash_hex(const std::string& config_json) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_json)));
  return buf;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out.good()) throw DataError(path + ": cannot open for writing");
  nlohmann::json j;
  j["command"] = manifest.command;
  j["config"] = nlohmann::json::parse(manifest.config_json);
  j["config_hash"] = config_hash_hex(manifest.config_json);
  j["seeds"] = manifest.seeds;
  j["version"] = manifest.version;
  out << j.dump(2) << "\n";
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw DataError(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid JSON (" + e.what() + ")");
  }
  RunManifest m;
  m.command = j.value("command", std::string{});
  m.config_json = j.at("config").dump();
  m.seeds = j.value("seeds", std::vector<uint64_t>{});
  m.config_hash = j.value("config_hash", std::string{});
  m.version = j.value("version", std::string{});
  return m;
}

}  // namespace rgbd
