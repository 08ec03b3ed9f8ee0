#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "rgbd/synth.hpp"

using namespace rgbd;

TEST_CASE("center-pixel depth matches the closed-form ray-floor distance") {
  SceneSpec spec;
  spec.image_width = 161;  // odd: integer center pixel sits exactly on cx
  spec.image_height = 121;
  spec.camera.pitch_deg = 30;
  spec.camera.height_m = 1.5;
  spec.camera.yaw_deg = 0;
  spec.room.length = 12;  // far enough that the center ray hits the floor
  SyntheticScene scene = render(spec);
  // center ray declines by exactly the pitch; the hit lies at
  // t = height / sin(pitch) along the ray, and depth equals t because the
  // center ray has unit forward component.
  double expected = 1.5 / std::sin(deg2rad(30.0));
  CHECK(scene.depth.at(80, 60) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("floor normals equal the negated gravity direction exactly") {
  SceneSpec spec;
  spec.image_width = 100;
  spec.image_height = 80;
  spec.camera.pitch_deg = 21;
  spec.seed = 2;
  SyntheticScene scene = render(spec);
  int floor_checked = 0;
  for (size_t i = 0; i < scene.gt_normals.normals.size(); ++i) {
    if (!scene.gt_normals.valid[i]) continue;
    if (scene.gt_heights.values[i] > 1e-12) continue;  // floor pixels only
    Vec3 n = scene.gt_normals.normals[i];
    CHECK(std::abs(n.x + scene.gt_gravity.x) < 1e-12);
    CHECK(std::abs(n.y + scene.gt_gravity.y) < 1e-12);
    CHECK(std::abs(n.z + scene.gt_gravity.z) < 1e-12);
    ++floor_checked;
  }
  CHECK(floor_checked > 1000);
}

TEST_CASE("rendering is deterministic given the seed") {
  SceneSpec spec;
  spec.image_width = 64;
  spec.image_height = 48;
  spec.objects.push_back({0, 0.0, 2.0, 0.0, 0.4, 0.4, 0.4, {200, 80, 80}});
  spec.noise.depth_sigma = 0.003;
  spec.noise.color_sigma = 8;
  spec.seed = 77;
  SyntheticScene a = render(spec);
  SyntheticScene b = render(spec);
  CHECK(a.depth.values == b.depth.values);
  CHECK(a.rgb.rgb == b.rgb.rgb);
  spec.seed = 78;
  SyntheticScene c = render(spec);
  CHECK(a.depth.values != c.depth.values);
}

TEST_CASE("ground-truth boxes tightly bound the rendered silhouettes") {
  SceneSpec spec;
  spec.image_width = 120;
  spec.image_height = 90;
  spec.camera.pitch_deg = 15;
  spec.objects.push_back({0, -0.5, 2.0, 0.0, 0.35, 0.35, 0.35, {200, 80, 80}});
  spec.objects.push_back({1, 0.5, 2.4, 0.0, 0.25, 0.6, 0.25, {80, 200, 80}});
  spec.objects.push_back({2, 0.0, 3.0, 0.0, 0.55, 0.12, 0.4, {80, 80, 200}});
  SyntheticScene scene = render(spec);
  REQUIRE(scene.gt_boxes.size() == 3);

  const int w = scene.depth.width;
  for (size_t b = 0; b < scene.gt_boxes.size(); ++b) {
    const BoundingBox& box = scene.gt_boxes[b].box;
    bool touch_left = false, touch_right = false, touch_top = false, touch_bottom = false;
    for (size_t i = 0; i < scene.object_id.size(); ++i) {
      if (scene.object_id[i] != static_cast<int>(b)) continue;
      int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
      CHECK(x >= box.x1);
      CHECK(x <= box.x2);
      CHECK(y >= box.y1);
      CHECK(y <= box.y2);
      if (scene.gt_silhouette[i]) {
        touch_left |= (x == box.x1);
        touch_right |= (x == box.x2);
        touch_top |= (y == box.y1);
        touch_bottom |= (y == box.y2);
      }
    }
    CHECK(touch_left);
    CHECK(touch_right);
    CHECK(touch_top);
    CHECK(touch_bottom);
  }
}

TEST_CASE("scene validation rejects broken specs") {
  SceneSpec spec;
  SUBCASE("interpenetrating objects") {
    spec.objects.push_back({0, 0.0, 2.0, 0.0, 0.5, 0.5, 0.5, {200, 80, 80}});
    spec.objects.push_back({1, 0.1, 2.1, 0.0, 0.5, 0.5, 0.5, {80, 200, 80}});
    CHECK_THROWS_AS(render(spec), DataError);
  }
  SUBCASE("floating object") {
    spec.objects.push_back({0, 0.0, 2.0, 0.7, 0.3, 0.3, 0.3, {200, 80, 80}});
    CHECK_THROWS_AS(render(spec), DataError);
  }
  SUBCASE("stacked object is supported") {
    spec.objects.push_back({0, 0.0, 2.0, 0.0, 0.5, 0.4, 0.5, {200, 80, 80}});
    spec.objects.push_back({1, 0.0, 2.0, 0.4, 0.2, 0.3, 0.2, {80, 200, 80}});
    CHECK_NOTHROW(render(spec));
  }
  SUBCASE("camera inside an object") {
    spec.objects.push_back({0, 0.0, 0.0, 0.0, 1.0, 3.0, 1.0, {200, 80, 80}});
    CHECK_THROWS_AS(render(spec), DataError);
  }
  SUBCASE("non-positive sizes") {
    spec.objects.push_back({0, 0.0, 2.0, 0.0, 0.0, 0.3, 0.3, {200, 80, 80}});
    CHECK_THROWS_AS(render(spec), DataError);
  }
}

TEST_CASE("noise-free derived maps agree with the analytic ground truth") {
  SceneSpec spec;
  spec.image_width = 160;
  spec.image_height = 120;
  spec.camera.pitch_deg = 14;
  spec.objects.push_back({0, -0.4, 2.0, 0.0, 0.35, 0.35, 0.35, {200, 80, 80}});
  spec.objects.push_back({2, 0.45, 2.5, 0.0, 0.5, 0.12, 0.4, {80, 80, 200}});
  SyntheticScene scene = render(spec);
  NormalMap derived = estimate_normals(unproject(scene.depth, scene.intrinsics));
  std::vector<uint8_t> mask = discontinuity_mask(scene, 6);
  int checked = 0;
  for (size_t i = 0; i < derived.normals.size(); ++i) {
    if (!derived.valid[i] || mask[i]) continue;
    CHECK(angle_deg(derived.normals[i], scene.gt_normals.normals[i]) < 0.5);
    ++checked;
  }
  CHECK(checked > 3000);
}

TEST_CASE("scene spec JSON round trip") {
  SceneSpec spec;
  spec.image_width = 99;
  spec.camera.pitch_deg = 17.5;
  spec.room.wall_back = true;
  spec.objects.push_back({1, 0.25, 2.0, 0.0, 0.2, 0.6, 0.2, {10, 20, 30}});
  spec.noise.depth_sigma = 0.0025;
  spec.seed = 1234;
  spec.randomize = SceneRandomization{};
  spec.randomize->pitch_max_deg = 28;
  spec.randomize->size_scale = 1.2;

  SceneSpec back = scene_spec_from_json(scene_spec_to_json(spec));
  CHECK(back.image_width == 99);
  CHECK(back.camera.pitch_deg == doctest::Approx(17.5));
  CHECK(back.room.wall_back == true);
  REQUIRE(back.objects.size() == 1);
  CHECK(back.objects[0].class_id == 1);
  CHECK(back.objects[0].sy == doctest::Approx(0.6));
  CHECK(back.objects[0].albedo[2] == 30);
  CHECK(back.noise.depth_sigma == doctest::Approx(0.0025));
  CHECK(back.seed == 1234);
  REQUIRE(back.randomize.has_value());
  CHECK(back.randomize->pitch_max_deg == doctest::Approx(28));
  CHECK(back.randomize->size_scale == doctest::Approx(1.2));

  CHECK_THROWS_AS(scene_spec_from_json("{broken"), DataError);
  CHECK_THROWS_AS(object_class_id("sofa"), DataError);
}

TEST_CASE("sampled scene specs vary but validate") {
  SceneSpec base;
  base.randomize = SceneRandomization{};
  base.seed = 9;
  std::set<int> object_counts;
  for (int i = 0; i < 8; ++i) {
    SceneSpec s = sample_scene_spec(base, i);
    CHECK_NOTHROW(render(s));
    object_counts.insert(static_cast<int>(s.objects.size()));
    CHECK(s.camera.pitch_deg >= base.randomize->pitch_min_deg - 1e-9);
    CHECK(s.camera.pitch_deg <= base.randomize->pitch_max_deg + 1e-9);
  }
  // same index twice gives the same spec
  SceneSpec a = sample_scene_spec(base, 3), b = sample_scene_spec(base, 3);
  CHECK(scene_spec_to_json(a) == scene_spec_to_json(b));
}

TEST_CASE("patch dataset is balanced, split 70/30, and stream-consistent") {
  SceneSpec base;
  base.image_width = 128;
  base.image_height = 96;
  base.randomize = SceneRandomization{};
  base.randomize->objects_min = 3;
  base.randomize->objects_max = 4;
  base.randomize->size_scale = 1.3;
  base.randomize->z_min = 1.3;
  base.randomize->z_max = 2.6;
  base.seed = 4;

  std::vector<std::string> streams = {"disparity", "height", "angle"};
  std::vector<SceneStreams> scenes;
  for (int i = 0; i < 3; ++i) {
    SceneSpec spec = sample_scene_spec(base, i);
    SyntheticScene scene = render(spec);
    PropertySet props = derive_all(scene.rgb, scene.depth, scene.intrinsics, DeriveConfig{});
    scenes.push_back(build_scene_streams(scene, props, streams));
  }
  const int per_class = 10;
  PatchDataset ds = make_patch_dataset(scenes, streams, 16, per_class, 42);

  CHECK(ds.n_classes == 4);
  CHECK(ds.channels == 1);
  std::vector<int> train_hist(4, 0), val_hist(4, 0);
  for (const auto& s : ds.train) {
    REQUIRE(s.streams.size() == 3);
    CHECK(s.streams[0].h == 16);
    train_hist[s.label]++;
  }
  for (const auto& s : ds.val) val_hist[s.label]++;
  for (int c = 0; c < 4; ++c) {
    CHECK(train_hist[c] == 7);  // 70 percent of 10
    CHECK(val_hist[c] == 3);
  }
  for (const auto& s : ds.train)
    for (const auto& t : s.streams)
      for (double v : t.v) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
}

TEST_CASE("patch crops carry the byte-scaled property values") {
  // single cube on the floor; the height stream over the cube's top face
  // is the image-level byte encoding of the cube height
  SceneSpec spec;
  spec.image_width = 128;
  spec.image_height = 96;
  spec.camera.pitch_deg = 24;
  spec.objects.push_back({0, 0.0, 1.5, 0.0, 0.6, 0.45, 0.6, {230, 150, 60}});
  SyntheticScene scene = render(spec);
  PropertySet props = derive_all(scene.rgb, scene.depth, scene.intrinsics, DeriveConfig{});
  SceneStreams streams = build_scene_streams(scene, props, {"height", "angle"});

  // locate a crop fully inside the top face
  const PropertyMap& h = props.maps.at("H");
  double lo = 1e30, hi = -1e30;
  for (size_t i = 0; i < h.pixel_count(); ++i) {
    if (!h.valid[i]) continue;
    lo = std::min(lo, h.values[i]);
    hi = std::max(hi, h.values[i]);
  }
  int expected_byte = static_cast<int>(std::lround((0.45 - lo) / (hi - lo) * 255.0));

  std::vector<uint8_t> mask = discontinuity_mask(scene, 2);
  int best_x = -1, best_y = -1;
  for (int y = 4; y < 92 && best_x < 0; ++y)
    for (int x = 4; x < 124 && best_x < 0; ++x) {
      bool ok = true;
      for (int dy = -3; dy <= 3 && ok; ++dy)
        for (int dx = -3; dx <= 3 && ok; ++dx) {
          size_t i = scene.depth.idx(x + dx, y + dy);
          ok = !mask[i] && std::abs(scene.gt_heights.values[i] - 0.45) < 1e-9;
        }
      if (ok) {
        best_x = x;
        best_y = y;
      }
    }
  REQUIRE(best_x >= 0);
  Tensor patch = crop_stream_patch(streams.streams[0], {best_x - 3, best_y - 3, best_x + 3, best_y + 3}, 8);
  for (double v : patch.v)
    CHECK(std::abs(v * 255.0 - expected_byte) <= 2.0);

  // background crop on the floor: angle stream reads the 180-degree byte
  const PropertyMap& a = props.maps.at("A");
  double alo = 1e30, ahi = -1e30;
  for (size_t i = 0; i < a.pixel_count(); ++i) {
    if (!a.valid[i]) continue;
    alo = std::min(alo, a.values[i]);
    ahi = std::max(ahi, a.values[i]);
  }
  int floor_byte = static_cast<int>(std::lround((180.0 - alo) / (ahi - alo) * 255.0));
  int fx = -1, fy = -1;
  for (int y = 90; y > 4 && fx < 0; --y)
    for (int x = 4; x < 124 && fx < 0; ++x) {
      bool ok = true;
      for (int dy = -3; dy <= 3 && ok; ++dy)
        for (int dx = -3; dx <= 3 && ok; ++dx) {
          size_t i = scene.depth.idx(x + dx, y + dy);
          ok = !mask[i] && scene.gt_heights.valid[i] && scene.gt_heights.values[i] < 1e-9;
        }
      if (ok) {
        fx = x;
        fy = y;
      }
    }
  REQUIRE(fx >= 0);
  Tensor floor_patch =
      crop_stream_patch(streams.streams[1], {fx - 3, fy - 3, fx + 3, fy + 3}, 8);
  for (double v : floor_patch.v)
    CHECK(std::abs(v * 255.0 - floor_byte) <= 3.0);
}

TEST_CASE("tiny ground-truth boxes are rejected") {
  SceneSpec spec;
  spec.image_width = 96;
  spec.image_height = 72;
  spec.camera.pitch_deg = 12;
  // a sliver of an object a long way out: a couple of pixels at most
  spec.objects.push_back({0, 0.0, 5.2, 0.0, 0.04, 0.04, 0.04, {200, 80, 80}});
  spec.room.length = 7;
  SyntheticScene scene = render(spec);
  if (scene.gt_boxes.empty()) return;  // not visible at all: nothing to test
  PropertySet props = derive_all(scene.rgb, scene.depth, scene.intrinsics, DeriveConfig{});
  std::vector<std::string> streams = {"disparity"};
  std::vector<SceneStreams> scenes = {build_scene_streams(scene, props, streams)};
  CHECK_THROWS_AS(make_patch_dataset(scenes, streams, 16, 4, 1), DataError);
}

TEST_CASE("rgb streams force replication to three channels") {
  SceneSpec spec;
  spec.image_width = 64;
  spec.image_height = 48;
  spec.objects.push_back({0, 0.0, 1.6, 0.0, 0.4, 0.4, 0.4, {200, 80, 80}});
  SyntheticScene scene = render(spec);
  PropertySet props = derive_all(scene.rgb, scene.depth, scene.intrinsics, DeriveConfig{});
  SceneStreams with_rgb = build_scene_streams(scene, props, {"rgb", "height"});
  CHECK(with_rgb.streams[0].channels == 3);
  CHECK(with_rgb.streams[1].channels == 3);  // replicated to match
  SceneStreams without = build_scene_streams(scene, props, {"disparity", "height"});
  CHECK(without.streams[0].channels == 1);
  CHECK_THROWS_AS(build_scene_streams(scene, props, {"nonsense"}), DataError);
}
