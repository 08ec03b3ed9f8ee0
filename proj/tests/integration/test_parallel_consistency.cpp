// The parallel kernel lanes must reproduce the serial reference bit for
// bit: outputs are per-pixel independent and inner summations keep a fixed
// order, so thread count and scheduling cannot change results.

#include "doctest.h"
#include "helpers.hpp"
#include "ref/ref_kernels.hpp"
#include "rgbd/fusionnet.hpp"
#include "rgbd/synth.hpp"

using namespace rgbd;

namespace {

SyntheticScene noisy_scene(uint64_t seed) {
  SceneSpec spec;
  spec.image_width = 160;
  spec.image_height = 120;
  spec.camera.pitch_deg = 17;
  spec.objects.push_back({0, -0.4, 2.0, 0.0, 0.35, 0.35, 0.35, {200, 80, 80}});
  spec.objects.push_back({1, 0.5, 2.4, 0.0, 0.25, 0.6, 0.25, {80, 200, 80}});
  spec.noise.depth_sigma = 0.003;
  spec.noise.color_sigma = 6;
  spec.seed = seed;
  return render(spec);
}

template <class T>
void check_identical(const std::vector<T>& a, const std::vector<T>& b) {
  REQUIRE(a.size() == b.size());
  CHECK(a == b);
}

}  // namespace

TEST_CASE("render is identical across lanes") {
  SceneSpec spec;
  spec.image_width = 120;
  spec.image_height = 90;
  spec.camera.pitch_deg = 22;
  spec.objects.push_back({2, 0.1, 2.2, 0.0, 0.5, 0.12, 0.4, {90, 90, 200}});
  spec.noise.depth_sigma = 0.004;
  spec.noise.color_sigma = 9;
  SyntheticScene serial = render(spec, Exec::Serial);
  SyntheticScene parallel = render(spec, Exec::Parallel);
  check_identical(serial.depth.values, parallel.depth.values);
  check_identical(serial.rgb.rgb, parallel.rgb.rgb);
  check_identical(serial.object_id, parallel.object_id);
}

TEST_CASE("geometry and geocentric kernels agree with the reference bit for bit") {
  SyntheticScene scene = noisy_scene(41);

  PointCloud ref_cloud = ref::unproject(scene.depth, scene.intrinsics);
  PointCloud ser = unproject(scene.depth, scene.intrinsics, Exec::Serial);
  PointCloud par = unproject(scene.depth, scene.intrinsics, Exec::Parallel);
  for (size_t i = 0; i < ref_cloud.points.size(); ++i) {
    CHECK(ser.points[i].x == ref_cloud.points[i].x);
    CHECK(ser.points[i].y == ref_cloud.points[i].y);
    CHECK(ser.points[i].z == ref_cloud.points[i].z);
    CHECK(par.points[i].x == ref_cloud.points[i].x);
    CHECK(par.points[i].y == ref_cloud.points[i].y);
    CHECK(par.points[i].z == ref_cloud.points[i].z);
  }

  NormalParams np;
  NormalMap ref_n = ref::estimate_normals(ref_cloud, np);
  NormalMap ser_n = estimate_normals(ref_cloud, np, Exec::Serial);
  NormalMap par_n = estimate_normals(ref_cloud, np, Exec::Parallel);
  check_identical(ref_n.valid, ser_n.valid);
  check_identical(ref_n.valid, par_n.valid);
  for (size_t i = 0; i < ref_n.normals.size(); ++i) {
    if (!ref_n.valid[i]) continue;
    CHECK(ser_n.normals[i].x == ref_n.normals[i].x);
    CHECK(par_n.normals[i].x == ref_n.normals[i].x);
    CHECK(par_n.normals[i].y == ref_n.normals[i].y);
    CHECK(par_n.normals[i].z == ref_n.normals[i].z);
  }

  GravityEstimate grav = estimate_gravity(par_n);

  PropertyMap ref_d = ref::disparity_map(scene.depth);
  check_identical(ref_d.values, disparity_map(scene.depth, Exec::Serial).values);
  check_identical(ref_d.values, disparity_map(scene.depth, Exec::Parallel).values);

  PropertyMap ref_h = ref::height_map(ref_cloud, grav.g);
  check_identical(ref_h.values, height_map(ref_cloud, grav.g, 0.0, Exec::Serial).values);
  check_identical(ref_h.values, height_map(ref_cloud, grav.g, 0.0, Exec::Parallel).values);

  PropertyMap ref_a = ref::angle_map(par_n, grav.g);
  check_identical(ref_a.values, angle_map(par_n, grav.g, Exec::Serial).values);
  check_identical(ref_a.values, angle_map(par_n, grav.g, Exec::Parallel).values);

  ByteMap ref_b = ref::scale_to_bytes(ref_a);
  check_identical(ref_b.values, scale_to_bytes(ref_a, std::nullopt, Exec::Serial).values);
  check_identical(ref_b.values, scale_to_bytes(ref_a, std::nullopt, Exec::Parallel).values);

  PropertyMap fc_ser = fallback_contour(scene.rgb, scene.depth, Exec::Serial);
  PropertyMap fc_par = fallback_contour(scene.rgb, scene.depth, Exec::Parallel);
  check_identical(fc_ser.values, fc_par.values);
}

TEST_CASE("feature extraction is identical across lanes") {
  NetworkConfig c;
  c.stream_names = {"a", "b"};
  c.in_channels = 1;
  c.patch = 16;
  c.classes = 3;
  c.conv_channels = {4, 6};
  c.fc1_width = 12;
  c.fusion = FusionPoint::Final;
  Network net = build_network(c);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Sample> samples;
  for (int i = 0; i < 24; ++i) {
    Sample s;
    for (int k = 0; k < 2; ++k) {
      Tensor t(1, 16, 16);
      for (double& v : t.v) v = u(rng);
      s.push_back(std::move(t));
    }
    samples.push_back(std::move(s));
  }
  auto ser = extract_features_batch(net, "fc1", samples, Exec::Serial);
  auto par = extract_features_batch(net, "fc1", samples, Exec::Parallel);
  REQUIRE(ser.size() == par.size());
  for (size_t i = 0; i < ser.size(); ++i) CHECK(ser[i] == par[i]);
}
