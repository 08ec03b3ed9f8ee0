#include "rgbd/geocentric.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string_view>

namespace rgbd {

PropertyMap disparity_map(const DepthMap& depth, Exec exec) {
  depth.validate();
  if (depth.pixel_count() == 0) throw DataError("disparity_map: empty depth map");
  PropertyMap out = PropertyMap::create(depth.width, depth.height, MapKind::Disparity);
  bool any_valid = false;
  for (uint8_t v : depth.valid) any_valid |= (v != 0);
  if (!any_valid) throw DataError("disparity_map: no valid pixels");
  for_each_row(depth.height, exec, [&](int y) {
    for (int x = 0; x < depth.width; ++x) {
      size_t i = depth.idx(x, y);
      if (!depth.valid[i]) continue;
      out.values[i] = 1.0 / depth.values[i];
      out.valid[i] = 1;
    }
  });
  return out;
}

PropertyMap height_map(const PointCloud& cloud, const Vec3& g, double ground_percentile,
                       Exec exec) {
  if (ground_percentile < 0 || ground_percentile >= 100)
    throw std::invalid_argument("height_map: percentile must be in [0, 100)");
  const Vec3 up = -g;

  if (!std::any_of(cloud.valid.begin(), cloud.valid.end(), [](uint8_t v) { return v != 0; }))
    throw DataError("height_map: no valid points");

  double ref;
  if (ground_percentile == 0.0) {
    double lo = std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(static) reduction(min : lo) if (exec == Exec::Parallel)
    for (int y = 0; y < cloud.height; ++y) {
      for (int x = 0; x < cloud.width; ++x) {
        size_t i = cloud.idx(x, y);
        if (cloud.valid[i]) lo = std::min(lo, dot(up, cloud.points[i]));
      }
    }
    ref = lo;
  } else {
    std::vector<double> ups;
    ups.reserve(cloud.points.size());
    for (size_t i = 0; i < cloud.points.size(); ++i)
      if (cloud.valid[i]) ups.push_back(dot(up, cloud.points[i]));
    if (ups.empty()) throw DataError("height_map: no valid points");
    size_t k = static_cast<size_t>(ground_percentile / 100.0 * (ups.size() - 1));
    std::nth_element(ups.begin(), ups.begin() + k, ups.end());
    ref = ups[k];
  }

  PropertyMap out = PropertyMap::create(cloud.width, cloud.height, MapKind::Height);
  for_each_row(cloud.height, exec, [&](int y) {
    for (int x = 0; x < cloud.width; ++x) {
      size_t i = cloud.idx(x, y);
      if (!cloud.valid[i]) continue;
      out.values[i] = std::max(0.0, dot(up, cloud.points[i]) - ref);
      out.valid[i] = 1;
    }
  });
  return out;
}

PropertyMap angle_map(const NormalMap& normals, const Vec3& g, Exec exec) {
  PropertyMap out = PropertyMap::create(normals.width, normals.height, MapKind::Angle);
  for_each_row(normals.height, exec, [&](int y) {
    for (int x = 0; x < normals.width; ++x) {
      size_t i = normals.idx(x, y);
      if (!normals.valid[i]) continue;
      out.values[i] = angle_deg(normals.normals[i], g);
      out.valid[i] = 1;
    }
  });
  return out;
}

PropertyMap ingest_contour(const std::string& path, int expect_width, int expect_height) {
  PropertyMap m;
  bool is_pmap = false;
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe.good()) throw DataError(path + ": cannot open");
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    is_pmap = probe.gcount() == 4 && std::string_view(magic, 4) == "PMAP";
  }
  if (is_pmap) {
    m = load_property_map(path);
    m.kind = MapKind::Contour;
  } else {
    ByteMap b = load_bytemap(path);
    if (b.channels != 1) throw DataError(path + ": contour image must be single channel");
    m = PropertyMap::create(b.width, b.height, MapKind::Contour);
    for (size_t i = 0; i < m.pixel_count(); ++i) {
      m.values[i] = b.values[i] / 255.0;
      m.valid[i] = 1;
    }
  }
  if (m.width != expect_width || m.height != expect_height)
    throw DataError(path + ": contour dimensions do not match the RGB-D frame");
  for (size_t i = 0; i < m.pixel_count(); ++i)
    if (m.valid[i]) m.values[i] = std::clamp(m.values[i], 0.0, 1.0);
  m.validate();
  return m;
}

namespace {

// Central differences with clamped borders over a scalar field; entries
// without usable support (masked) contribute zero.
double grad_mag_at(const std::vector<double>& f, const std::vector<uint8_t>& mask, int w, int h,
                   int x, int y) {
  auto at = [&](int xx, int yy) -> double { return f[static_cast<size_t>(yy) * w + xx]; };
  auto ok = [&](int xx, int yy) -> bool {
    return mask.empty() || mask[static_cast<size_t>(yy) * w + xx] != 0;
  };
  if (!ok(x, y)) return 0.0;
  int xm = std::max(0, x - 1), xp = std::min(w - 1, x + 1);
  int ym = std::max(0, y - 1), yp = std::min(h - 1, y + 1);
  double gx = 0, gy = 0;
  if (ok(xm, y) && ok(xp, y) && xp > xm)
    gx = (at(xp, y) - at(xm, y)) / (xp - xm);
  else if (ok(xp, y) && xp > x)
    gx = at(xp, y) - at(x, y);
  else if (ok(xm, y) && x > xm)
    gx = at(x, y) - at(xm, y);
  if (ok(x, ym) && ok(x, yp) && yp > ym)
    gy = (at(x, yp) - at(x, ym)) / (yp - ym);
  else if (ok(x, yp) && yp > y)
    gy = at(x, yp) - at(x, y);
  else if (ok(x, ym) && y > ym)
    gy = at(x, y) - at(x, ym);
  return std::sqrt(gx * gx + gy * gy);
}

// Min-max normalization in place; a constant field maps to all zeros.
void minmax_normalize(std::vector<double>& f) {
  auto [lo_it, hi_it] = std::minmax_element(f.begin(), f.end());
  double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    std::fill(f.begin(), f.end(), 0.0);
    return;
  }
  for (double& v : f) v = (v - lo) / (hi - lo);
}

}  // namespace

PropertyMap fallback_contour(const ColorImage& rgb, const DepthMap& depth, Exec exec) {
  rgb.validate();
  depth.validate();
  if (rgb.width != depth.width || rgb.height != depth.height)
    throw DataError("fallback_contour: rgb and depth dimensions differ");
  const int w = rgb.width, h = rgb.height;
  const size_t n = static_cast<size_t>(w) * h;

  std::vector<double> luma(n);
  for (size_t i = 0; i < n; ++i) {
    luma[i] = 0.299 * rgb.rgb[3 * i] + 0.587 * rgb.rgb[3 * i + 1] + 0.114 * rgb.rgb[3 * i + 2];
  }

  std::vector<double> gl(n, 0.0), gz(n, 0.0);
  std::vector<uint8_t> no_mask;
  for_each_row(h, exec, [&](int y) {
    for (int x = 0; x < w; ++x) {
      size_t i = static_cast<size_t>(y) * w + x;
      gl[i] = grad_mag_at(luma, no_mask, w, h, x, y);
      gz[i] = grad_mag_at(depth.values, depth.valid, w, h, x, y);
    }
  });
  minmax_normalize(gl);
  minmax_normalize(gz);

  PropertyMap out = PropertyMap::create(w, h, MapKind::Contour);
  for (size_t i = 0; i < n; ++i) {
    out.values[i] = 0.5 * gl[i] + 0.5 * gz[i];
    out.valid[i] = 1;
  }
  return out;
}

PropertySet derive_all(const ColorImage& rgb, const DepthMap& depth, const CameraIntrinsics& k,
                       const DeriveConfig& config, Exec exec) {
  rgb.validate();
  depth.validate();
  if (rgb.width != depth.width || rgb.height != depth.height)
    throw DataError("derive_all: rgb and depth dimensions differ");

  PointCloud cloud = unproject(depth, k, exec);
  NormalMap normals = estimate_normals(cloud, config.normals, exec);

  PropertySet set;
  set.rgb = rgb;
  set.gravity = estimate_gravity(normals, config.gravity);
  Vec3 g = config.height_along_camera_y ? Vec3{0, 1, 0} : set.gravity.g;

  set.maps.emplace("D", disparity_map(depth, exec));
  set.maps.emplace("H", height_map(cloud, g, config.ground_percentile, exec));
  set.maps.emplace("A", angle_map(normals, g, exec));
  if (config.want_contour) {
    if (config.contour_path)
      set.maps.emplace("Contour", ingest_contour(*config.contour_path, depth.width, depth.height));
    else
      set.maps.emplace("Contour", fallback_contour(rgb, depth, exec));
  }
  return set;
}

}  // namespace rgbd
