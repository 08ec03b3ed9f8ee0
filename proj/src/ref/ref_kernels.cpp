#include "ref_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rgbd::ref {

PointCloud unproject(const DepthMap& depth, const CameraIntrinsics& k) {
  PointCloud cloud = PointCloud::create(depth.width, depth.height);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      size_t i = depth.idx(u, v);
      if (!depth.valid[i]) continue;
      double z = depth.values[i];
      cloud.points[i] = {(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z};
      cloud.valid[i] = 1;
    }
  }
  return cloud;
}

NormalMap estimate_normals(const PointCloud& cloud, const NormalParams& params) {
  const int r = params.window / 2;
  NormalMap out = NormalMap::create(cloud.width, cloud.height);
  for (int v = 0; v < cloud.height; ++v) {
    for (int u = 0; u < cloud.width; ++u) {
      size_t ci = cloud.idx(u, v);
      if (!cloud.valid[ci]) continue;
      const Vec3 center = cloud.points[ci];

      int count = 0;
      Vec3 mean{};
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          int x = u + dx, y = v + dy;
          if (x < 0 || x >= cloud.width || y < 0 || y >= cloud.height) continue;
          size_t ni = cloud.idx(x, y);
          if (!cloud.valid[ni]) continue;
          if (std::abs(cloud.points[ni].z - center.z) > params.max_rel_depth_gap * center.z)
            continue;
          mean += cloud.points[ni];
          ++count;
        }
      }
      if (2 * count < params.window * params.window) continue;
      mean = mean / static_cast<double>(count);

      Mat3 cov;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          int x = u + dx, y = v + dy;
          if (x < 0 || x >= cloud.width || y < 0 || y >= cloud.height) continue;
          size_t ni = cloud.idx(x, y);
          if (!cloud.valid[ni]) continue;
          if (std::abs(cloud.points[ni].z - center.z) > params.max_rel_depth_gap * center.z)
            continue;
          Vec3 d = cloud.points[ni] - mean;
          cov = cov + outer(d, d);
        }
      }
      SymEigen3 eig = sym_eigen3(cov);
      double scale = std::max({std::abs(eig.values[0]), std::abs(eig.values[2]), 1e-300});
      if (eig.smallest_gap <= 1e-9 * scale) continue;
      if (eig.values[0] > params.max_planarity_ratio * eig.values[1]) continue;
      Vec3 n = eig.vectors[0];
      if (dot(n, center) > 0) n = -n;
      out.normals[ci] = normalized(n);
      out.valid[ci] = 1;
    }
  }
  return out;
}

PropertyMap disparity_map(const DepthMap& depth) {
  PropertyMap out = PropertyMap::create(depth.width, depth.height, MapKind::Disparity);
  for (size_t i = 0; i < depth.pixel_count(); ++i) {
    if (!depth.valid[i]) continue;
    out.values[i] = 1.0 / depth.values[i];
    out.valid[i] = 1;
  }
  return out;
}

PropertyMap height_map(const PointCloud& cloud, const Vec3& g) {
  const Vec3 up = -g;
  double ref = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < cloud.points.size(); ++i)
    if (cloud.valid[i]) ref = std::min(ref, dot(up, cloud.points[i]));
  PropertyMap out = PropertyMap::create(cloud.width, cloud.height, MapKind::Height);
  for (size_t i = 0; i < cloud.points.size(); ++i) {
    if (!cloud.valid[i]) continue;
    out.values[i] = std::max(0.0, dot(up, cloud.points[i]) - ref);
    out.valid[i] = 1;
  }
  return out;
}

PropertyMap angle_map(const NormalMap& normals, const Vec3& g) {
  PropertyMap out = PropertyMap::create(normals.width, normals.height, MapKind::Angle);
  for (size_t i = 0; i < normals.normals.size(); ++i) {
    if (!normals.valid[i]) continue;
    out.values[i] = angle_deg(normals.normals[i], g);
    out.valid[i] = 1;
  }
  return out;
}

ByteMap scale_to_bytes(const PropertyMap& map) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < map.pixel_count(); ++i) {
    if (!map.valid[i]) continue;
    lo = std::min(lo, map.values[i]);
    hi = std::max(hi, map.values[i]);
  }
  if (!(lo <= hi)) throw DataError("ref::scale_to_bytes: no valid pixels");
  ByteMap out = ByteMap::create(map.width, map.height, 1);
  for (size_t i = 0; i < map.pixel_count(); ++i) {
    if (!map.valid[i]) {
      out.values[i] = 0;
    } else if (!(hi > lo)) {
      out.values[i] = 128;
    } else {
      out.values[i] =
          static_cast<uint8_t>(std::lround((map.values[i] - lo) * (255.0 / (hi - lo))));
    }
  }
  return out;
}

}  // namespace rgbd::ref
