#include "rgbd/geometry.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace rgbd {

CameraIntrinsics load_intrinsics(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw DataError(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid JSON (" + e.what() + ")");
  }
  CameraIntrinsics k;
  try {
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(path + ": missing fx/fy/cx/cy");
  }
  if (!(k.fx > 0) || !(k.fy > 0)) throw DataError(path + ": focal lengths must be positive");
  return k;
}

void save_intrinsics(const CameraIntrinsics& k, const std::string& path) {
  std::ofstream out(path);
  if (!out.good()) throw DataError(path + ": cannot open for writing");
  nlohmann::json j{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
  out << j.dump(2) << "\n";
}

PointCloud PointCloud::create(int w, int h) {
  PointCloud c;
  c.width = w;
  c.height = h;
  c.points.assign(static_cast<size_t>(w) * h, Vec3{});
  c.valid.assign(static_cast<size_t>(w) * h, 0);
  return c;
}

NormalMap NormalMap::create(int w, int h) {
  NormalMap n;
  n.width = w;
  n.height = h;
  n.normals.assign(static_cast<size_t>(w) * h, Vec3{});
  n.valid.assign(static_cast<size_t>(w) * h, 0);
  return n;
}

PointCloud unproject(const DepthMap& depth, const CameraIntrinsics& k, Exec exec) {
  depth.validate();
  PointCloud cloud = PointCloud::create(depth.width, depth.height);
  for_each_row(depth.height, exec, [&](int v) {
    for (int u = 0; u < depth.width; ++u) {
      size_t i = depth.idx(u, v);
      if (!depth.valid[i]) continue;
      double z = depth.values[i];
      cloud.points[i] = {(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z};
      cloud.valid[i] = 1;
    }
  });
  return cloud;
}

NormalMap estimate_normals(const PointCloud& cloud, const NormalParams& params, Exec exec) {
  if (params.window < 3 || params.window % 2 == 0)
    throw std::invalid_argument("estimate_normals: window must be odd and >= 3");
  const int r = params.window / 2;
  const int min_support_x2 = params.window * params.window;  // count*2 >= window^2

  NormalMap out = NormalMap::create(cloud.width, cloud.height);
  for_each_row(cloud.height, exec, [&](int v) {
    for (int u = 0; u < cloud.width; ++u) {
      size_t ci = cloud.idx(u, v);
      if (!cloud.valid[ci]) continue;
      const Vec3 center = cloud.points[ci];
      const double zc = center.z;

      // Two passes with a fixed scan order: mean, then scatter.
      int count = 0;
      Vec3 mean{};
      for (int dy = -r; dy <= r; ++dy) {
        int y = v + dy;
        if (y < 0 || y >= cloud.height) continue;
        for (int dx = -r; dx <= r; ++dx) {
          int x = u + dx;
          if (x < 0 || x >= cloud.width) continue;
          size_t ni = cloud.idx(x, y);
          if (!cloud.valid[ni]) continue;
          if (std::abs(cloud.points[ni].z - zc) > params.max_rel_depth_gap * zc) continue;
          mean += cloud.points[ni];
          ++count;
        }
      }
      if (2 * count < min_support_x2) continue;
      mean = mean / static_cast<double>(count);

      Mat3 cov;
      for (int dy = -r; dy <= r; ++dy) {
        int y = v + dy;
        if (y < 0 || y >= cloud.height) continue;
        for (int dx = -r; dx <= r; ++dx) {
          int x = u + dx;
          if (x < 0 || x >= cloud.width) continue;
          size_t ni = cloud.idx(x, y);
          if (!cloud.valid[ni]) continue;
          if (std::abs(cloud.points[ni].z - zc) > params.max_rel_depth_gap * zc) continue;
          Vec3 d = cloud.points[ni] - mean;
          cov = cov + outer(d, d);
        }
      }

      SymEigen3 eig = sym_eigen3(cov);
      // Collinear or otherwise degenerate neighborhoods have no unique
      // least-variance direction; reject them.
      double scale = std::max({std::abs(eig.values[0]), std::abs(eig.values[2]), 1e-300});
      if (eig.smallest_gap <= 1e-9 * scale) continue;
      // A neighborhood straddling a crease is not a plane: the residual
      // along the fitted normal stays comparable to the in-plane spread.
      if (eig.values[0] > params.max_planarity_ratio * eig.values[1]) continue;

      Vec3 n = eig.vectors[0];
      if (dot(n, center) > 0) n = -n;
      out.normals[ci] = normalized(n);
      out.valid[ci] = 1;
    }
  });
  return out;
}

}  // namespace rgbd
