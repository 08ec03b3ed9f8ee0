#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "rgbd/imagery.hpp"
#include "rgbd/linalg3.hpp"

namespace rgbd::test {

// Unique scratch path under the system temp dir; caller cleans up or not,
// the names never collide within a run.
inline std::string scratch_path(const std::string& tag) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() / "rgbdfuse_tests";
  std::filesystem::create_directories(dir);
  return (dir / (tag + "_" + std::to_string(counter++))).string();
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Vec3 v{n(rng), n(rng), n(rng)};
    double len = norm(v);
    if (len > 1e-6) return v / len;
  }
}

inline PropertyMap random_property_map(int w, int h, std::mt19937_64& rng,
                                       double invalid_fraction = 0.1) {
  PropertyMap m = PropertyMap::create(w, h, MapKind::Other);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (size_t i = 0; i < m.pixel_count(); ++i) {
    if (coin(rng) < invalid_fraction) continue;
    m.values[i] = u(rng);
    m.valid[i] = 1;
  }
  return m;
}

inline DepthMap random_depth_map(int w, int h, std::mt19937_64& rng,
                                 double invalid_fraction = 0.1) {
  DepthMap d = DepthMap::create(w, h);
  std::uniform_real_distribution<double> u(0.3, 8.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (size_t i = 0; i < d.pixel_count(); ++i) {
    if (coin(rng) < invalid_fraction) continue;
    d.values[i] = u(rng);
    d.valid[i] = 1;
  }
  return d;
}

}  // namespace rgbd::test
