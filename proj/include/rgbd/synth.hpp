#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rgbd/dataset.hpp"
#include "rgbd/detect.hpp"
#include "rgbd/geocentric.hpp"

namespace rgbd {

// Procedural RGB-D scenes with analytic ground truth. Geometry is planes
// and axis-aligned boxes only, so every oracle quantity has a closed form
// independent of the estimation code under test.
//
// World frame: Y up, floor at y = 0, gravity (0,-1,0). The camera sits at
// (x, height, z), yawed about world Y and pitched down by pitch_deg.

inline constexpr int kNumObjectClasses = 3;
const std::vector<std::string>& object_class_names();  // cube, tallbox, slab
int object_class_id(const std::string& name);

struct ObjectSpec {
  int class_id = 0;
  double x = 0, z = 2.0;     // center on the floor plane
  double base_y = 0;         // resting height (0 = on the floor)
  double sx = 0.3, sy = 0.3, sz = 0.3;
  std::array<uint8_t, 3> albedo{200, 80, 80};
};

struct CameraPose {
  double pitch_deg = 15, yaw_deg = 0;
  double height_m = 1.5;
  double x = 0, z = 0;
};

struct RoomSpec {
  double width = 6, length = 8, wall_height = 3;
  bool wall_left = true, wall_right = true, wall_front = true, wall_back = false;
  std::array<uint8_t, 3> floor_albedo{110, 110, 110};
  std::array<uint8_t, 3> wall_albedo{180, 180, 170};
};

struct NoiseSpec {
  double depth_sigma = 0;  // meters; > 0 also quantizes depth to 1 mm
  double color_sigma = 0;  // byte units
};

// Optional per-scene randomization used by the generator CLI and the
// experiment runner when many varied scenes come from one base spec.
struct SceneRandomization {
  int objects_min = 2, objects_max = 4;
  double pitch_min_deg = 5, pitch_max_deg = 30;
  double yaw_abs_max_deg = 10;
  double cam_height_min = 1.2, cam_height_max = 1.8;
  double size_jitter = 0.3;   // relative, uniform in [1-j, 1+j]
  double size_scale = 1.0;    // global object-size multiplier
  double z_min = 1.4, z_max = 4.5;  // object placement range (clipped to the room)
  double x_abs_max = 1.6;
};

struct SceneSpec {
  int image_width = 160, image_height = 120;
  double hfov_deg = 60;
  CameraPose camera;
  RoomSpec room;
  std::vector<ObjectSpec> objects;
  NoiseSpec noise;
  uint64_t seed = 1;
  std::optional<SceneRandomization> randomize;
};

SceneSpec scene_spec_from_json(const std::string& json_text);
SceneSpec load_scene_spec(const std::string& path);
std::string scene_spec_to_json(const SceneSpec& spec);

// Concrete spec for scene `index` under the randomization block (camera
// pose, object layout and sizes resampled deterministically). Without a
// randomization block only the seed changes.
SceneSpec sample_scene_spec(const SceneSpec& base, int index);

struct SyntheticScene {
  ColorImage rgb;
  DepthMap depth;
  CameraIntrinsics intrinsics;
  Vec3 gt_gravity;            // camera frame, unit
  NormalMap gt_normals;       // analytic, noise-free
  PropertyMap gt_heights;     // analytic, noise-free
  std::vector<GroundTruthBox> gt_boxes;
  std::vector<uint8_t> gt_silhouette;  // object-mask boundary pixels
  std::vector<int32_t> object_id;      // per pixel: >=0 object, -1 room, -2 miss
};

SyntheticScene render(const SceneSpec& spec, Exec exec = Exec::Parallel);

// Oracle-side mask of surface discontinuities: pixels within `dilate_px`
// of a silhouette pixel, an invalid pixel, or a crease (adjacent analytic
// normals differing by more than 2 degrees). Local window estimators are
// only expected to match the analytic fields away from these.
std::vector<uint8_t> discontinuity_mask(const SyntheticScene& scene, int dilate_px);

// Streams of one rendered+derived scene, byte-scaled over the full image
// (crops inherit the image-level scaling, as the downstream network does).
struct SceneStreams {
  int width = 0, height = 0;
  std::vector<ByteMap> streams;  // parallel to the stream-name list used to build them
  std::vector<GroundTruthBox> gt_boxes;
};

// Supported stream names: "rgb" (3 channels), "disparity", "height",
// "angle", "contour" (1 channel each).
SceneStreams build_scene_streams(const SyntheticScene& scene, const PropertySet& props,
                                 const std::vector<std::string>& stream_names);

// Square crops centered on ground-truth boxes (label = class) and on
// background (label = n_classes), cut from every stream, resized to
// patch x patch by nearest neighbor. Balanced: per_class samples for each
// class including background; 70/30 train/val split by seeded shuffle.
PatchDataset make_patch_dataset(const std::vector<SceneStreams>& scenes,
                                const std::vector<std::string>& stream_names, int patch,
                                int per_class, uint64_t seed);

// Crop+resize used for both dataset patches and proposal features.
Tensor crop_stream_patch(const ByteMap& stream, const BoundingBox& box, int patch);

}  // namespace rgbd
