#pragma once

#include <map>
#include <optional>
#include <string>

#include "rgbd/gravity.hpp"

namespace rgbd {

// Geocentric property maps derived from a color/depth pair: horizontal
// disparity (reciprocal depth), height above the lowest point along the
// gravity axis, angle between surface normal and gravity, plus the
// contour channel (precomputed file or a gradient fallback).

struct PropertySet {
  ColorImage rgb;
  std::map<std::string, PropertyMap> maps;  // keys: "D", "H", "A", "Contour"
  GravityEstimate gravity;
};

// value = 1/z on valid pixels. Any stereo baseline constant would be
// absorbed by byte scaling, so none is applied.
PropertyMap disparity_map(const DepthMap& depth, Exec exec = Exec::Parallel);

// up = -g; h(p) = up . p - ref, where ref is the minimum of up . q over
// valid points (ground surrogate), or the given percentile of it when
// ground_percentile > 0. Values below the reference clamp to zero so the
// height invariant (h >= 0, min h = 0) holds under the percentile option.
PropertyMap height_map(const PointCloud& cloud, const Vec3& g, double ground_percentile = 0.0,
                       Exec exec = Exec::Parallel);

// arccos(clamp(n.g, -1, 1)) in degrees, range [0, 180].
PropertyMap angle_map(const NormalMap& normals, const Vec3& g, Exec exec = Exec::Parallel);

// Reads a precomputed contour map: either a PropertyMap file or an 8-bit
// P5 graymap interpreted as value/255. Values clamp to [0, 1].
PropertyMap ingest_contour(const std::string& path, int expect_width, int expect_height);

// Stand-in when no precomputed contour exists: mean of the min-max
// normalized central-difference gradient magnitudes of luma and depth.
PropertyMap fallback_contour(const ColorImage& rgb, const DepthMap& depth,
                             Exec exec = Exec::Parallel);

struct DeriveConfig {
  NormalParams normals;
  GravityParams gravity;
  double ground_percentile = 0.0;          // 0 = exact minimum
  bool height_along_camera_y = false;      // raw -Y instead of estimated gravity
  std::optional<std::string> contour_path; // precomputed contour; fallback otherwise
  bool want_contour = true;
};

// Full derivation: unproject -> normals -> gravity -> D/H/A (+ contour).
PropertySet derive_all(const ColorImage& rgb, const DepthMap& depth, const CameraIntrinsics& k,
                       const DeriveConfig& config = {}, Exec exec = Exec::Parallel);

}  // namespace rgbd
