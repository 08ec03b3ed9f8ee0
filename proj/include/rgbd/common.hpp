#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rgbd {

// Error taxonomy shared with the CLI: DataError maps to exit 2,
// NumericError to exit 3. Usage errors are CLI11's domain (exit 1).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Execution lane for the per-pixel kernels. Serial is the reference
// order; Parallel must be bit-identical to it (outputs are per-pixel
// independent and every inner summation keeps a fixed order).
enum class Exec { Serial, Parallel };

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Row-sliced dispatch for raster kernels.
template <class F>
void for_each_row(int rows, Exec exec, F&& body) {
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < rows; ++y) body(y);
  } else {
    for (int y = 0; y < rows; ++y) body(y);
  }
}

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stateless mix of a seed and a counter; used where parallel loops need
// per-element randomness independent of iteration order.
inline uint64_t hash_mix(uint64_t seed, uint64_t counter) {
  uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL + counter * 0xff51afd7ed558ccdULL);
  return splitmix64(s);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Fixed-format float for CSV output; stable across runs of the same build.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace rgbd
