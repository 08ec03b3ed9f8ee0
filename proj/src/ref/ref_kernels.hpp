#pragma once

#include "rgbd/geocentric.hpp"
#include "rgbd/geometry.hpp"

// Straight-line serial reference implementations of the per-pixel kernels.
// They follow the kernel definitions with no dispatch, hoisting or OpenMP;
// tests pin the production lanes (Serial and Parallel) bit-for-bit against
// them, and the benchmark reports all three.

namespace rgbd::ref {

PointCloud unproject(const DepthMap& depth, const CameraIntrinsics& k);
NormalMap estimate_normals(const PointCloud& cloud, const NormalParams& params);
PropertyMap disparity_map(const DepthMap& depth);
PropertyMap height_map(const PointCloud& cloud, const Vec3& g);
PropertyMap angle_map(const NormalMap& normals, const Vec3& g);
ByteMap scale_to_bytes(const PropertyMap& map);

}  // namespace rgbd::ref
