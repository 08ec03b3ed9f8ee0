#pragma once

#include <string>
#include <vector>

#include "rgbd/imagery.hpp"
#include "rgbd/linalg3.hpp"

namespace rgbd {

// Camera frame: X right, Y down, Z forward. Depth values are distances
// along Z, not ray lengths.

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
};

// Reads {"fx":..., "fy":..., "cx":..., "cy":...}.
CameraIntrinsics load_intrinsics(const std::string& path);
void save_intrinsics(const CameraIntrinsics& k, const std::string& path);

struct PointCloud {
  int width = 0, height = 0;
  std::vector<Vec3> points;
  std::vector<uint8_t> valid;

  size_t idx(int u, int v) const { return static_cast<size_t>(v) * width + u; }
  bool is_valid(int u, int v) const { return valid[idx(u, v)] != 0; }
  static PointCloud create(int w, int h);
};

struct NormalMap {
  int width = 0, height = 0;
  std::vector<Vec3> normals;  // unit length, camera-facing (n . p <= 0)
  std::vector<uint8_t> valid;

  size_t idx(int u, int v) const { return static_cast<size_t>(v) * width + u; }
  bool is_valid(int u, int v) const { return valid[idx(u, v)] != 0; }
  static NormalMap create(int w, int h);
};

// Pinhole unprojection: X = (u-cx) z / fx, Y = (v-cy) z / fy, Z = z.
PointCloud unproject(const DepthMap& depth, const CameraIntrinsics& k, Exec exec = Exec::Parallel);

struct NormalParams {
  int window = 9;                   // odd, >= 3
  double max_rel_depth_gap = 0.05;  // neighbors with |dz| > gap * z are excluded
  double max_planarity_ratio = 0.01;  // lambda_min / lambda_mid above this = not a plane
};

// Least-variance plane fit over a square pixel neighborhood: the normal is
// the smallest-eigenvalue eigenvector of the neighbor covariance, flipped
// camera-facing. A pixel needs more than window^2 / 2 accepted neighbors
// and a covariance that actually describes a plane (unique smallest
// eigenvalue, out-of-plane residual small next to the in-plane spread),
// otherwise it is marked invalid. Collinear neighborhoods and surface
// creases fail those gates.
NormalMap estimate_normals(const PointCloud& cloud, const NormalParams& params = {},
                           Exec exec = Exec::Parallel);

}  // namespace rgbd
