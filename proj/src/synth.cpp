#include "rgbd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"

namespace rgbd {

const std::vector<std::string>& object_class_names() {
  static const std::vector<std::string> names = {"cube", "tallbox", "slab"};
  return names;
}

int object_class_id(const std::string& name) {
  const auto& names = object_class_names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw DataError("unknown object class: " + name);
}

namespace {

double u01(uint64_t h) {
  // 53 random bits into (0, 1)
  return static_cast<double>(h >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// Counter-based gaussian: deterministic and independent of pixel order.
double gauss(uint64_t seed, uint64_t salt, uint64_t idx) {
  double u1 = u01(hash_mix(seed ^ (salt * 0x9e3779b97f4a7c15ULL), 2 * idx));
  double u2 = u01(hash_mix(seed ^ (salt * 0x9e3779b97f4a7c15ULL), 2 * idx + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

struct Basis {
  Vec3 x, y, z;  // camera axes in world coordinates

  Vec3 to_world(const Vec3& c) const { return x * c.x + y * c.y + z * c.z; }
  Vec3 to_camera(const Vec3& w) const { return {dot(x, w), dot(y, w), dot(z, w)}; }
};

Basis camera_basis(const CameraPose& pose) {
  double th = deg2rad(pose.pitch_deg);
  Mat3 yaw = rot_y(deg2rad(pose.yaw_deg));
  Basis b;
  b.x = yaw * Vec3{1, 0, 0};
  b.y = yaw * Vec3{0, -std::cos(th), -std::sin(th)};  // image down
  b.z = yaw * Vec3{0, -std::sin(th), std::cos(th)};   // forward
  return b;
}

struct Hit {
  double t = 0;             // ray parameter == camera-frame depth
  Vec3 normal_w{};          // unit, world frame
  std::array<uint8_t, 3> albedo{};
  int object_index = -1;    // -1 for room surfaces
};

constexpr double kRayEps = 1e-9;

bool hit_axis_plane(const Vec3& origin, const Vec3& dir, int axis, double coord, double t_best,
                    Hit* hit) {
  double o = axis == 0 ? origin.x : (axis == 1 ? origin.y : origin.z);
  double d = axis == 0 ? dir.x : (axis == 1 ? dir.y : dir.z);
  if (std::abs(d) < 1e-15) return false;
  double t = (coord - o) / d;
  if (t <= kRayEps || t >= t_best) return false;
  hit->t = t;
  return true;
}

bool hit_box(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi, double t_best,
             Hit* hit) {
  double tmin = kRayEps, tmax = t_best;
  int entry_axis = -1;
  double entry_sign = 0;
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const double l[3] = {lo.x, lo.y, lo.z};
  const double h[3] = {hi.x, hi.y, hi.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < l[a] || o[a] > h[a]) return false;
      continue;
    }
    double t1 = (l[a] - o[a]) / d[a];
    double t2 = (h[a] - o[a]) / d[a];
    double sign = -1;  // entering through the low face -> outward normal is -axis
    if (t1 > t2) {
      std::swap(t1, t2);
      sign = 1;
    }
    if (t1 > tmin) {
      tmin = t1;
      entry_axis = a;
      entry_sign = sign;
    }
    tmax = std::min(tmax, t2);
    if (tmin >= tmax) return false;
  }
  if (entry_axis < 0) return false;  // origin inside the box; callers forbid this
  hit->t = tmin;
  hit->normal_w = Vec3{};
  if (entry_axis == 0) hit->normal_w.x = entry_sign;
  if (entry_axis == 1) hit->normal_w.y = entry_sign;
  if (entry_axis == 2) hit->normal_w.z = entry_sign;
  return true;
}

struct WallRect {
  int axis;         // fixed coordinate axis (0 = x, 2 = z)
  double coord;
  double normal_sign;  // outward-into-room direction along `axis`
  std::array<uint8_t, 3> albedo;
};

void validate_spec(const SceneSpec& spec) {
  if (spec.image_width <= 0 || spec.image_height <= 0)
    throw DataError("scene spec: non-positive image dimensions");
  if (!(spec.hfov_deg > 10 && spec.hfov_deg < 170))
    throw DataError("scene spec: horizontal fov out of range");
  for (const auto& o : spec.objects) {
    if (!(o.sx > 0 && o.sy > 0 && o.sz > 0)) throw DataError("scene spec: object sizes must be positive");
    if (o.class_id < 0 || o.class_id >= kNumObjectClasses)
      throw DataError("scene spec: unknown object class id");
  }
  // Support: every object rests on the floor or on top of another object.
  for (size_t i = 0; i < spec.objects.size(); ++i) {
    const auto& o = spec.objects[i];
    if (std::abs(o.base_y) < 1e-9) continue;
    bool supported = false;
    for (size_t j = 0; j < spec.objects.size() && !supported; ++j) {
      if (j == i) continue;
      const auto& s = spec.objects[j];
      if (std::abs(s.base_y + s.sy - o.base_y) > 1e-9) continue;
      if (std::abs(s.x - o.x) <= (s.sx + o.sx) / 2 && std::abs(s.z - o.z) <= (s.sz + o.sz) / 2)
        supported = true;
    }
    if (!supported) throw DataError("scene spec: floating object (no support)");
  }
  // No interpenetration.
  auto overlap1d = [](double c0, double s0, double c1, double s1) {
    return std::min(c0 + s0 / 2, c1 + s1 / 2) - std::max(c0 - s0 / 2, c1 - s1 / 2);
  };
  for (size_t i = 0; i < spec.objects.size(); ++i) {
    for (size_t j = i + 1; j < spec.objects.size(); ++j) {
      const auto& a = spec.objects[i];
      const auto& b = spec.objects[j];
      double ox = overlap1d(a.x, a.sx, b.x, b.sx);
      double oz = overlap1d(a.z, a.sz, b.z, b.sz);
      double oy = std::min(a.base_y + a.sy, b.base_y + b.sy) - std::max(a.base_y, b.base_y);
      if (ox > 1e-9 && oz > 1e-9 && oy > 1e-9)
        throw DataError("scene spec: interpenetrating objects");
    }
  }
}

}  // namespace

SyntheticScene render(const SceneSpec& spec, Exec exec) {
  validate_spec(spec);
  const int w = spec.image_width, h = spec.image_height;
  const size_t n = static_cast<size_t>(w) * h;

  CameraIntrinsics k;
  k.fx = (w / 2.0) / std::tan(deg2rad(spec.hfov_deg) / 2.0);
  k.fy = k.fx;
  k.cx = (w - 1) / 2.0;
  k.cy = (h - 1) / 2.0;

  const Basis basis = camera_basis(spec.camera);
  const Vec3 cam{spec.camera.x, spec.camera.height_m, spec.camera.z};
  const RoomSpec& room = spec.room;
  const double z_back = -1.0;

  // Precompute object AABBs; reject a camera placed inside one.
  std::vector<std::pair<Vec3, Vec3>> boxes;
  for (const auto& o : spec.objects) {
    Vec3 lo{o.x - o.sx / 2, o.base_y, o.z - o.sz / 2};
    Vec3 hi{o.x + o.sx / 2, o.base_y + o.sy, o.z + o.sz / 2};
    boxes.emplace_back(lo, hi);
    if (cam.x >= lo.x && cam.x <= hi.x && cam.y >= lo.y && cam.y <= hi.y && cam.z >= lo.z &&
        cam.z <= hi.z)
      throw DataError("scene spec: camera placed inside an object");
  }

  std::vector<WallRect> walls;
  if (room.wall_left) walls.push_back({0, -room.width / 2, 1, room.wall_albedo});
  if (room.wall_right) walls.push_back({0, room.width / 2, -1, room.wall_albedo});
  if (room.wall_front) walls.push_back({2, room.length, -1, room.wall_albedo});
  if (room.wall_back) walls.push_back({2, z_back, 1, room.wall_albedo});

  SyntheticScene scene;
  scene.rgb = ColorImage::create(w, h);
  scene.depth = DepthMap::create(w, h);
  scene.intrinsics = k;
  scene.gt_gravity = basis.to_camera({0, -1, 0});
  scene.gt_normals = NormalMap::create(w, h);
  scene.gt_heights = PropertyMap::create(w, h, MapKind::Height);
  scene.gt_silhouette.assign(n, 0);
  scene.object_id.assign(n, -2);

  const bool noisy_depth = spec.noise.depth_sigma > 0;
  const bool noisy_color = spec.noise.color_sigma > 0;

  for_each_row(h, exec, [&](int v) {
    for (int u = 0; u < w; ++u) {
      const size_t i = static_cast<size_t>(v) * w + u;
      const Vec3 dir_c{(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
      const Vec3 dir = basis.to_world(dir_c);  // ray parameter t equals camera-frame depth

      Hit best;
      best.t = 1e30;
      bool found = false;
      Hit cand;

      // floor
      if (hit_axis_plane(cam, dir, 1, 0.0, best.t, &cand)) {
        Vec3 p = cam + dir * cand.t;
        if (std::abs(p.x) <= room.width / 2 && p.z >= z_back && p.z <= room.length) {
          cand.normal_w = {0, 1, 0};
          cand.albedo = room.floor_albedo;
          cand.object_index = -1;
          best = cand;
          found = true;
        }
      }
      // walls
      for (const WallRect& wall : walls) {
        if (!hit_axis_plane(cam, dir, wall.axis, wall.coord, best.t, &cand)) continue;
        Vec3 p = cam + dir * cand.t;
        if (p.y < 0 || p.y > room.wall_height) continue;
        if (wall.axis == 0) {
          if (p.z < z_back || p.z > room.length) continue;
        } else {
          if (std::abs(p.x) > room.width / 2) continue;
        }
        cand.normal_w = Vec3{};
        if (wall.axis == 0)
          cand.normal_w.x = wall.normal_sign;
        else
          cand.normal_w.z = wall.normal_sign;
        cand.albedo = wall.albedo;
        cand.object_index = -1;
        best = cand;
        found = true;
      }
      // objects
      for (size_t b = 0; b < boxes.size(); ++b) {
        if (!hit_box(cam, dir, boxes[b].first, boxes[b].second, best.t, &cand)) continue;
        cand.albedo = spec.objects[b].albedo;
        cand.object_index = static_cast<int>(b);
        best = cand;
        found = true;
      }

      if (!found) {
        scene.rgb.rgb[3 * i] = scene.rgb.rgb[3 * i + 1] = scene.rgb.rgb[3 * i + 2] = 0;
        continue;  // depth stays invalid: no reading
      }

      const Vec3 p_world = cam + dir * best.t;
      const Vec3 p_cam = basis.to_camera(p_world - cam);

      double depth = p_cam.z;
      if (noisy_depth) {
        depth += spec.noise.depth_sigma * gauss(spec.seed, 0xD1u, i);
        depth = std::round(depth * 1000.0) / 1000.0;  // 1 mm quantization, as on disk
        if (depth < 0.001) depth = 0.001;
      }
      scene.depth.values[i] = depth;
      scene.depth.valid[i] = 1;

      for (int c = 0; c < 3; ++c) {
        double val = best.albedo[c];
        if (noisy_color) val += spec.noise.color_sigma * gauss(spec.seed, 0xC0u + c, i);
        scene.rgb.rgb[3 * i + c] = static_cast<uint8_t>(std::clamp(std::lround(val), 0l, 255l));
      }

      Vec3 n_cam = basis.to_camera(best.normal_w);
      if (dot(n_cam, p_cam) > 0) n_cam = -n_cam;
      scene.gt_normals.normals[i] = n_cam;
      scene.gt_normals.valid[i] = 1;

      scene.gt_heights.values[i] = std::max(0.0, p_world.y);
      scene.gt_heights.valid[i] = 1;

      scene.object_id[i] = best.object_index;
    }
  });

  // Object-mask boundaries (4-neighborhood) and tight boxes from the masks.
  std::vector<BoundingBox> extents(spec.objects.size(), BoundingBox{1 << 30, 1 << 30, -1, -1});
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      size_t i = static_cast<size_t>(v) * w + u;
      int id = scene.object_id[i];
      if (id < 0) continue;
      auto& e = extents[id];
      e.x1 = std::min(e.x1, u);
      e.y1 = std::min(e.y1, v);
      e.x2 = std::max(e.x2, u);
      e.y2 = std::max(e.y2, v);
      const int du[4] = {1, -1, 0, 0};
      const int dv[4] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d) {
        int uu = u + du[d], vv = v + dv[d];
        if (uu < 0 || uu >= w || vv < 0 || vv >= h) {
          scene.gt_silhouette[i] = 1;
          break;
        }
        if (scene.object_id[static_cast<size_t>(vv) * w + uu] != id) {
          scene.gt_silhouette[i] = 1;
          break;
        }
      }
    }
  }
  for (size_t b = 0; b < extents.size(); ++b) {
    if (extents[b].x2 < 0) continue;  // not visible
    scene.gt_boxes.push_back({spec.objects[b].class_id, extents[b]});
  }
  return scene;
}

std::vector<uint8_t> discontinuity_mask(const SyntheticScene& scene, int dilate_px) {
  const int w = scene.depth.width, h = scene.depth.height;
  std::vector<uint8_t> seed(static_cast<size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      size_t i = static_cast<size_t>(y) * w + x;
      if (scene.gt_silhouette[i] || !scene.gt_normals.valid[i]) {
        seed[i] = 1;
        continue;
      }
      const int du[2] = {1, 0}, dv[2] = {0, 1};
      for (int d = 0; d < 2 && !seed[i]; ++d) {
        int xx = x + du[d], yy = y + dv[d];
        if (xx >= w || yy >= h) continue;
        size_t j = static_cast<size_t>(yy) * w + xx;
        if (!scene.gt_normals.valid[j] ||
            angle_deg(scene.gt_normals.normals[i], scene.gt_normals.normals[j]) > 2.0)
          seed[i] = 1;
      }
    }
  }
  std::vector<uint8_t> mask(seed.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      size_t i = static_cast<size_t>(y) * w + x;
      if (!seed[i]) continue;
      for (int dy = -dilate_px; dy <= dilate_px; ++dy)
        for (int dx = -dilate_px; dx <= dilate_px; ++dx) {
          int xx = x + dx, yy = y + dy;
          if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
          mask[static_cast<size_t>(yy) * w + xx] = 1;
        }
    }
  return mask;
}

// ---- spec JSON ----------------------------------------------------------

namespace {

nlohmann::json objects_to_json(const std::vector<ObjectSpec>& objects) {
  auto arr = nlohmann::json::array();
  for (const auto& o : objects) {
    arr.push_back({{"class", object_class_names()[o.class_id]},
                   {"x", o.x},
                   {"z", o.z},
                   {"base_y", o.base_y},
                   {"size", {o.sx, o.sy, o.sz}},
                   {"albedo", {o.albedo[0], o.albedo[1], o.albedo[2]}}});
  }
  return arr;
}

std::array<uint8_t, 3> albedo_from_json(const nlohmann::json& j, std::array<uint8_t, 3> dflt) {
  if (!j.is_array() || j.size() != 3) return dflt;
  return {j[0].get<uint8_t>(), j[1].get<uint8_t>(), j[2].get<uint8_t>()};
}

}  // namespace

std::string scene_spec_to_json(const SceneSpec& spec) {
  nlohmann::json j;
  j["image"] = {{"width", spec.image_width}, {"height", spec.image_height}, {"hfov_deg", spec.hfov_deg}};
  j["camera"] = {{"pitch_deg", spec.camera.pitch_deg},
                 {"yaw_deg", spec.camera.yaw_deg},
                 {"height_m", spec.camera.height_m},
                 {"x", spec.camera.x},
                 {"z", spec.camera.z}};
  j["room"] = {{"width", spec.room.width},
               {"length", spec.room.length},
               {"wall_height", spec.room.wall_height},
               {"walls",
                {{"left", spec.room.wall_left},
                 {"right", spec.room.wall_right},
                 {"front", spec.room.wall_front},
                 {"back", spec.room.wall_back}}},
               {"floor_albedo", {spec.room.floor_albedo[0], spec.room.floor_albedo[1], spec.room.floor_albedo[2]}},
               {"wall_albedo", {spec.room.wall_albedo[0], spec.room.wall_albedo[1], spec.room.wall_albedo[2]}}};
  j["objects"] = objects_to_json(spec.objects);
  j["noise"] = {{"depth_sigma", spec.noise.depth_sigma}, {"color_sigma", spec.noise.color_sigma}};
  j["seed"] = spec.seed;
  if (spec.randomize) {
    const auto& r = *spec.randomize;
    j["randomize"] = {{"objects_min", r.objects_min},       {"objects_max", r.objects_max},
                      {"pitch_min_deg", r.pitch_min_deg},   {"pitch_max_deg", r.pitch_max_deg},
                      {"yaw_abs_max_deg", r.yaw_abs_max_deg}, {"cam_height_min", r.cam_height_min},
                      {"cam_height_max", r.cam_height_max}, {"size_jitter", r.size_jitter},
                      {"size_scale", r.size_scale},         {"z_min", r.z_min},
                      {"z_max", r.z_max},                   {"x_abs_max", r.x_abs_max}};
  }
  return j.dump(2);
}

SceneSpec scene_spec_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scene spec: invalid JSON (") + e.what() + ")");
  }
  SceneSpec spec;
  if (j.contains("image")) {
    spec.image_width = j["image"].value("width", spec.image_width);
    spec.image_height = j["image"].value("height", spec.image_height);
    spec.hfov_deg = j["image"].value("hfov_deg", spec.hfov_deg);
  }
  if (j.contains("camera")) {
    spec.camera.pitch_deg = j["camera"].value("pitch_deg", spec.camera.pitch_deg);
    spec.camera.yaw_deg = j["camera"].value("yaw_deg", spec.camera.yaw_deg);
    spec.camera.height_m = j["camera"].value("height_m", spec.camera.height_m);
    spec.camera.x = j["camera"].value("x", spec.camera.x);
    spec.camera.z = j["camera"].value("z", spec.camera.z);
  }
  if (j.contains("room")) {
    const auto& r = j["room"];
    spec.room.width = r.value("width", spec.room.width);
    spec.room.length = r.value("length", spec.room.length);
    spec.room.wall_height = r.value("wall_height", spec.room.wall_height);
    if (r.contains("walls")) {
      spec.room.wall_left = r["walls"].value("left", spec.room.wall_left);
      spec.room.wall_right = r["walls"].value("right", spec.room.wall_right);
      spec.room.wall_front = r["walls"].value("front", spec.room.wall_front);
      spec.room.wall_back = r["walls"].value("back", spec.room.wall_back);
    }
    if (r.contains("floor_albedo")) spec.room.floor_albedo = albedo_from_json(r["floor_albedo"], spec.room.floor_albedo);
    if (r.contains("wall_albedo")) spec.room.wall_albedo = albedo_from_json(r["wall_albedo"], spec.room.wall_albedo);
  }
  if (j.contains("objects")) {
    for (const auto& jo : j["objects"]) {
      ObjectSpec o;
      o.class_id = object_class_id(jo.at("class").get<std::string>());
      o.x = jo.value("x", o.x);
      o.z = jo.value("z", o.z);
      o.base_y = jo.value("base_y", o.base_y);
      if (jo.contains("size")) {
        const auto& s = jo["size"];
        if (!s.is_array() || s.size() != 3) throw DataError("scene spec: object size must be [sx, sy, sz]");
        o.sx = s[0].get<double>();
        o.sy = s[1].get<double>();
        o.sz = s[2].get<double>();
      }
      if (jo.contains("albedo")) o.albedo = albedo_from_json(jo["albedo"], o.albedo);
      spec.objects.push_back(o);
    }
  }
  if (j.contains("noise")) {
    spec.noise.depth_sigma = j["noise"].value("depth_sigma", spec.noise.depth_sigma);
    spec.noise.color_sigma = j["noise"].value("color_sigma", spec.noise.color_sigma);
  }
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("randomize")) {
    SceneRandomization r;
    const auto& jr = j["randomize"];
    r.objects_min = jr.value("objects_min", r.objects_min);
    r.objects_max = jr.value("objects_max", r.objects_max);
    r.pitch_min_deg = jr.value("pitch_min_deg", r.pitch_min_deg);
    r.pitch_max_deg = jr.value("pitch_max_deg", r.pitch_max_deg);
    r.yaw_abs_max_deg = jr.value("yaw_abs_max_deg", r.yaw_abs_max_deg);
    r.cam_height_min = jr.value("cam_height_min", r.cam_height_min);
    r.cam_height_max = jr.value("cam_height_max", r.cam_height_max);
    r.size_jitter = jr.value("size_jitter", r.size_jitter);
    r.size_scale = jr.value("size_scale", r.size_scale);
    r.z_min = jr.value("z_min", r.z_min);
    r.z_max = jr.value("z_max", r.z_max);
    r.x_abs_max = jr.value("x_abs_max", r.x_abs_max);
    spec.randomize = r;
  }
  return spec;
}

SceneSpec load_scene_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw DataError(path + ": cannot open");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return scene_spec_from_json(text);
}

SceneSpec sample_scene_spec(const SceneSpec& base, int index) {
  SceneSpec spec = base;
  spec.seed = hash_mix(base.seed, static_cast<uint64_t>(index));
  spec.randomize.reset();
  if (!base.randomize) return spec;

  const SceneRandomization& r = *base.randomize;
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  spec.camera.pitch_deg = uniform(r.pitch_min_deg, r.pitch_max_deg);
  spec.camera.yaw_deg = uniform(-r.yaw_abs_max_deg, r.yaw_abs_max_deg);
  spec.camera.height_m = uniform(r.cam_height_min, r.cam_height_max);

  // Class-balanced object list: class i % 3, sizes jittered, positions
  // rejection-sampled against XZ overlap.
  static const double base_dims[kNumObjectClasses][3] = {
      {0.30, 0.30, 0.30},  // cube
      {0.22, 0.55, 0.22},  // tallbox
      {0.50, 0.14, 0.38},  // slab
  };
  static const uint8_t base_albedo[kNumObjectClasses][3] = {
      {230, 150, 60}, {50, 70, 200}, {210, 210, 210}};

  int count = r.objects_min + static_cast<int>(rng() % static_cast<uint64_t>(
                                                   r.objects_max - r.objects_min + 1));
  spec.objects.clear();
  const double zmax = std::min(base.room.length - 0.8, r.z_max);
  for (int i = 0; i < count; ++i) {
    ObjectSpec o;
    o.class_id = i % kNumObjectClasses;
    double jx = uniform(1.0 - r.size_jitter, 1.0 + r.size_jitter);
    double jy = uniform(1.0 - r.size_jitter, 1.0 + r.size_jitter);
    double jz = uniform(1.0 - r.size_jitter, 1.0 + r.size_jitter);
    o.sx = base_dims[o.class_id][0] * jx * r.size_scale;
    o.sy = base_dims[o.class_id][1] * jy * r.size_scale;
    o.sz = base_dims[o.class_id][2] * jz * r.size_scale;
    for (int c = 0; c < 3; ++c)
      o.albedo[c] = static_cast<uint8_t>(
          std::clamp<long>(std::lround(base_albedo[o.class_id][c] + uniform(-30, 30)), 0, 255));
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      o.x = uniform(-r.x_abs_max, r.x_abs_max);
      o.z = uniform(r.z_min, zmax);
      placed = true;
      for (const auto& prev : spec.objects) {
        double gap_x = std::abs(prev.x - o.x) - (prev.sx + o.sx) / 2;
        double gap_z = std::abs(prev.z - o.z) - (prev.sz + o.sz) / 2;
        if (gap_x < 0.08 && gap_z < 0.08) {
          placed = false;
          break;
        }
      }
    }
    if (placed) spec.objects.push_back(o);
  }
  return spec;
}

// ---- streams & patches --------------------------------------------------

SceneStreams build_scene_streams(const SyntheticScene& scene, const PropertySet& props,
                                 const std::vector<std::string>& stream_names) {
  SceneStreams out;
  out.width = scene.depth.width;
  out.height = scene.depth.height;
  out.gt_boxes = scene.gt_boxes;

  bool any_rgb = false;
  for (const auto& name : stream_names) any_rgb |= (name == "rgb");

  for (const auto& name : stream_names) {
    if (name == "rgb") {
      ByteMap b = ByteMap::create(out.width, out.height, 3);
      b.values = scene.rgb.rgb;
      out.streams.push_back(std::move(b));
      continue;
    }
    const char* key = nullptr;
    if (name == "disparity")
      key = "D";
    else if (name == "height")
      key = "H";
    else if (name == "angle")
      key = "A";
    else if (name == "contour")
      key = "Contour";
    else
      throw DataError("unknown stream name: " + name);
    ByteMap b = scale_to_bytes(props.maps.at(key));
    if (any_rgb) b = replicate_channels(b);  // keep branch shapes identical across streams
    out.streams.push_back(std::move(b));
  }
  return out;
}

Tensor crop_stream_patch(const ByteMap& stream, const BoundingBox& box, int patch) {
  if (patch <= 0) throw std::invalid_argument("crop_stream_patch: patch must be positive");
  const int bw = box.x2 - box.x1 + 1;
  const int bh = box.y2 - box.y1 + 1;
  Tensor t(stream.channels, patch, patch);
  for (int py = 0; py < patch; ++py) {
    int sy = box.y1 + static_cast<int>((static_cast<long long>(py) * bh) / patch);
    sy = std::clamp(sy, 0, stream.height - 1);
    for (int px = 0; px < patch; ++px) {
      int sx = box.x1 + static_cast<int>((static_cast<long long>(px) * bw) / patch);
      sx = std::clamp(sx, 0, stream.width - 1);
      size_t si = stream.idx(sx, sy);
      for (int c = 0; c < stream.channels; ++c) t.at(c, py, px) = stream.values[si + c] / 255.0;
    }
  }
  return t;
}

namespace {

// Square crop around a box center, clamped inside the frame.
BoundingBox square_crop(const BoundingBox& box, int frame_w, int frame_h) {
  int side = std::max(box.x2 - box.x1 + 1, box.y2 - box.y1 + 1);
  side = std::min({side, frame_w, frame_h});
  int cx = (box.x1 + box.x2) / 2;
  int cy = (box.y1 + box.y2) / 2;
  int x1 = std::clamp(cx - side / 2, 0, frame_w - side);
  int y1 = std::clamp(cy - side / 2, 0, frame_h - side);
  return {x1, y1, x1 + side - 1, y1 + side - 1};
}

}  // namespace

PatchDataset make_patch_dataset(const std::vector<SceneStreams>& scenes,
                                const std::vector<std::string>& stream_names, int patch,
                                int per_class, uint64_t seed) {
  if (patch < 4) throw std::invalid_argument("make_patch_dataset: patch must be >= 4");
  if (per_class < 2) throw std::invalid_argument("make_patch_dataset: per_class must be >= 2");
  if (scenes.empty()) throw DataError("make_patch_dataset: no scenes");

  PatchDataset ds;
  ds.stream_names = stream_names;
  ds.patch = patch;
  ds.channels = scenes[0].streams.empty() ? 0 : scenes[0].streams[0].channels;
  ds.n_classes = kNumObjectClasses + 1;  // + background

  // Candidate (scene, crop box) per class.
  std::vector<std::vector<std::pair<size_t, BoundingBox>>> candidates(kNumObjectClasses);
  std::vector<int> sides;
  for (size_t s = 0; s < scenes.size(); ++s) {
    for (const auto& g : scenes[s].gt_boxes) {
      int bw = g.box.x2 - g.box.x1 + 1;
      int bh = g.box.y2 - g.box.y1 + 1;
      if (std::max(bw, bh) < 4) throw DataError("make_patch_dataset: ground-truth box smaller than 4 px");
      candidates[g.class_id].emplace_back(s, square_crop(g.box, scenes[s].width, scenes[s].height));
      sides.push_back(std::max(bw, bh));
    }
  }
  std::mt19937_64 rng(seed);

  auto make_sample = [&](size_t scene_idx, const BoundingBox& crop, int label) {
    PatchSample sample;
    sample.label = label;
    for (const ByteMap& stream : scenes[scene_idx].streams)
      sample.streams.push_back(crop_stream_patch(stream, crop, patch));
    return sample;
  };

  std::vector<std::vector<PatchSample>> per_class_samples(ds.n_classes);
  for (int c = 0; c < kNumObjectClasses; ++c) {
    auto& cand = candidates[c];
    if (cand.empty())
      throw DataError("make_patch_dataset: no instances of class " + object_class_names()[c]);
    std::shuffle(cand.begin(), cand.end(), rng);
    for (int i = 0; i < per_class; ++i) {
      const auto& pick = cand.size() >= static_cast<size_t>(per_class)
                             ? cand[i]
                             : cand[rng() % cand.size()];  // with replacement when scarce
      per_class_samples[c].push_back(make_sample(pick.first, pick.second, c));
    }
  }

  // Background crops: random square windows rejected against all boxes.
  const int bg_label = kNumObjectClasses;
  int attempts_left = 2000 * per_class;
  while (static_cast<int>(per_class_samples[bg_label].size()) < per_class) {
    if (--attempts_left < 0) throw DataError("make_patch_dataset: cannot place background crops");
    size_t s = rng() % scenes.size();
    int side = sides[rng() % sides.size()];
    side = std::min({side, scenes[s].width, scenes[s].height});
    int x1 = static_cast<int>(rng() % static_cast<uint64_t>(scenes[s].width - side + 1));
    int y1 = static_cast<int>(rng() % static_cast<uint64_t>(scenes[s].height - side + 1));
    BoundingBox crop{x1, y1, x1 + side - 1, y1 + side - 1};
    bool clear = true;
    for (const auto& g : scenes[s].gt_boxes) {
      if (iou(crop, g.box) >= 0.3) {
        clear = false;
        break;
      }
    }
    if (clear) per_class_samples[bg_label].push_back(make_sample(s, crop, bg_label));
  }

  // 70/30 split within each class keeps both sides balanced.
  for (int c = 0; c < ds.n_classes; ++c) {
    auto& samples = per_class_samples[c];
    std::shuffle(samples.begin(), samples.end(), rng);
    size_t n_train = (samples.size() * 7) / 10;
    for (size_t i = 0; i < samples.size(); ++i) {
      if (i < n_train)
        ds.train.push_back(std::move(samples[i]));
      else
        ds.val.push_back(std::move(samples[i]));
    }
  }
  std::shuffle(ds.train.begin(), ds.train.end(), rng);
  std::shuffle(ds.val.begin(), ds.val.end(), rng);
  return ds;
}

}  // namespace rgbd
