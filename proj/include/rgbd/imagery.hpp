#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rgbd/common.hpp"

namespace rgbd {

// Per-pixel rasters with validity masks are the pipeline's currency.
// All types are immutable after construction by convention; operations
// below are pure functions.

enum class MapKind : uint32_t { Disparity = 0, Height = 1, Angle = 2, Contour = 3, Other = 4 };

struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> values;   // meters
  std::vector<uint8_t> valid;   // 0/1; invalid pixels carry value 0

  size_t idx(int u, int v) const { return static_cast<size_t>(v) * width + u; }
  bool is_valid(int u, int v) const { return valid[idx(u, v)] != 0; }
  double at(int u, int v) const { return values[idx(u, v)]; }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }

  static DepthMap create(int w, int h);
  // Enforces: dimensions > 0, array lengths, depth > 0 and finite on valid pixels.
  void validate() const;
};

struct ColorImage {
  int width = 0, height = 0;
  std::vector<uint8_t> rgb;  // interleaved, 3 bytes per pixel

  size_t idx(int u, int v) const { return (static_cast<size_t>(v) * width + u) * 3; }
  static ColorImage create(int w, int h);
  void validate() const;
};

struct PropertyMap {
  int width = 0, height = 0;
  MapKind kind = MapKind::Other;
  std::vector<double> values;
  std::vector<uint8_t> valid;

  size_t idx(int u, int v) const { return static_cast<size_t>(v) * width + u; }
  bool is_valid(int u, int v) const { return valid[idx(u, v)] != 0; }
  double at(int u, int v) const { return values[idx(u, v)]; }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  size_t valid_count() const;

  static PropertyMap create(int w, int h, MapKind kind);
  // Finite values on valid pixels plus the kind-specific range:
  // Angle in [0, 180] degrees, Height >= 0, Contour in [0, 1].
  void validate() const;
};

struct ByteMap {
  int width = 0, height = 0, channels = 1;  // 1 or 3
  std::vector<uint8_t> values;              // interleaved when channels == 3

  size_t idx(int u, int v) const { return (static_cast<size_t>(v) * width + u) * channels; }
  static ByteMap create(int w, int h, int channels);
};

// ---- File I/O ----------------------------------------------------------
// Depth on disk: binary P5 PGM, 16-bit, millimeters, 0 = no reading.
// Color: binary P6 PPM, 8-bit. ByteMap: P5 or P6 by channel count.
// PropertyMap: 16-byte header (magic "PMAP", u32 width, u32 height,
// u32 kind, little-endian) + float32 LE values, with a P5 validity-mask
// sidecar at <path>.mask.pgm.

DepthMap load_depth(const std::string& path);
void save_depth(const DepthMap& d, const std::string& path);

ColorImage load_color(const std::string& path);
void save_color(const ColorImage& c, const std::string& path);

ByteMap load_bytemap(const std::string& path);
void save_bytemap(const ByteMap& b, const std::string& path);

PropertyMap load_property_map(const std::string& path);
void save_property_map(const PropertyMap& m, const std::string& path);

// ---- Encoding ----------------------------------------------------------

struct ScaleRange {
  double lo = 0, hi = 0;
};

// Linear map of valid values onto 0..255, rounded to nearest. Without an
// explicit range the valid-pixel min/max is used (per-image scaling); a
// degenerate range yields 128 everywhere. Invalid pixels encode as 0.
// Values outside an explicit range are clamped.
ByteMap scale_to_bytes(const PropertyMap& map, std::optional<ScaleRange> range = std::nullopt,
                       Exec exec = Exec::Parallel);

// Single channel copied into all three; the paper-style adaptation of a
// grayscale property map to a 3-channel network input.
ByteMap replicate_channels(const ByteMap& b);

}  // namespace rgbd
