// Command-line front end: derive property maps, generate synthetic data,
// train/extract/classify, evaluate detections, run the fusion sweep, and
// plot results. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <algorithm>
#include <cmath>
#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "rgbd/experiment.hpp"
#include "rgbd/manifest.hpp"
#include "rgbd/plot.hpp"

namespace fs = std::filesystem;
using namespace rgbd;

namespace {

GravitySchedule parse_schedule(const std::string& text) {
  // "45:3,15:3"
  GravitySchedule schedule;
  std::string token;
  std::istringstream ss(text);
  while (std::getline(ss, token, ',')) {
    auto colon = token.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("schedule: expected d:steps pairs, got " + token);
    schedule.emplace_back(std::stod(token.substr(0, colon)),
                          std::stoi(token.substr(colon + 1)));
  }
  if (schedule.empty()) throw std::invalid_argument("schedule: empty");
  return schedule;
}

void write_run_manifest(const std::string& out_dir, const std::string& command,
                        const std::string& config_json, const std::vector<uint64_t>& seeds) {
  RunManifest m;
  m.command = command;
  m.config_json = config_json;
  m.seeds = seeds;
  m.config_hash = config_hash_hex(config_json);
  write_manifest(m, (fs::path(out_dir) / "manifest.json").string());
}

// ---- derive -------------------------------------------------------------

struct DeriveArgs {
  std::string rgb, depth, intrinsics, out, contour, in_dir;
  int window = 9;
  double depth_gap = 0.05;
  std::string schedule = "45:3,15:3";
  double percentile = 0.0;
  bool camera_y = false;
  bool self_test = false;
};

void write_property_outputs(const std::string& out_dir, const std::string& stem,
                            const PropertySet& set) {
  for (const auto& [name, map] : set.maps) {
    std::string base = (fs::path(out_dir) / (stem + "_" + name)).string();
    save_property_map(map, base + ".pmap");
    save_bytemap(scale_to_bytes(map), base + ".pgm");  // preview
  }
  std::ofstream trace((fs::path(out_dir) / (stem + "_gravity.json")).string());
  trace << set.gravity.trace_json() << "\n";
}

int run_derive_self_test(std::ostream& log);

int cmd_derive(const DeriveArgs& args) {
  fs::create_directories(args.out);
  if (args.self_test) return run_derive_self_test(std::cout);

  DeriveConfig cfg;
  cfg.normals.window = args.window;
  cfg.normals.max_rel_depth_gap = args.depth_gap;
  cfg.gravity.schedule = parse_schedule(args.schedule);
  cfg.ground_percentile = args.percentile;
  cfg.height_along_camera_y = args.camera_y;

  std::vector<std::pair<std::string, std::string>> frames;  // (rgb, depth)
  if (!args.in_dir.empty()) {
    std::set<std::string> stems;
    for (const auto& entry : fs::directory_iterator(args.in_dir))
      if (entry.path().extension() == ".ppm") stems.insert(entry.path().stem().string());
    for (const auto& stem : stems) {
      fs::path depth = fs::path(args.in_dir) / (stem + ".pgm");
      if (fs::exists(depth))
        frames.emplace_back((fs::path(args.in_dir) / (stem + ".ppm")).string(), depth.string());
    }
    if (frames.empty()) throw DataError(args.in_dir + ": no paired .ppm/.pgm frames found");
  } else {
    if (args.rgb.empty() || args.depth.empty())
      throw std::invalid_argument("derive: need --rgb and --depth (or --in)");
    frames.emplace_back(args.rgb, args.depth);
  }
  if (args.intrinsics.empty()) throw std::invalid_argument("derive: need --intrinsics");
  if (!fs::exists(args.intrinsics)) throw DataError(args.intrinsics + ": no such file");
  CameraIntrinsics k = load_intrinsics(args.intrinsics);

  for (const auto& [rgb_path, depth_path] : frames) {
    ColorImage rgb = load_color(rgb_path);
    DepthMap depth = load_depth(depth_path);
    DeriveConfig frame_cfg = cfg;
    if (!args.contour.empty()) frame_cfg.contour_path = args.contour;
    PropertySet set = derive_all(rgb, depth, k, frame_cfg);
    write_property_outputs(args.out, fs::path(rgb_path).stem().string(), set);
    std::cout << "derived " << fs::path(rgb_path).stem().string() << " (gravity ["
              << format_double(set.gravity.g.x) << ", " << format_double(set.gravity.g.y) << ", "
              << format_double(set.gravity.g.z) << "])\n";
  }

  nlohmann::json cfg_json{{"window", args.window},       {"depth_gap", args.depth_gap},
                          {"schedule", args.schedule},   {"percentile", args.percentile},
                          {"camera_y", args.camera_y},   {"intrinsics", args.intrinsics},
                          {"frames", frames.size()}};
  write_run_manifest(args.out, "derive", cfg_json.dump(), {});
  return 0;
}

// Inline oracle checks on internally generated scenes; exercised by CI and
// by users as a smoke test of the full derivation chain.
int run_derive_self_test(std::ostream& log) {
  SceneSpec spec;
  spec.image_width = 160;
  spec.image_height = 120;
  spec.camera.pitch_deg = 18;
  spec.camera.height_m = 1.5;
  spec.objects.push_back({0, -0.5, 2.2, 0.0, 0.35, 0.35, 0.35, {200, 80, 80}});
  spec.objects.push_back({1, 0.6, 2.6, 0.0, 0.2, 0.6, 0.2, {80, 200, 80}});
  spec.seed = 99;

  bool ok = true;
  auto check = [&](bool cond, const std::string& what) {
    log << (cond ? "  [ok] " : "  [FAIL] ") << what << "\n";
    ok = ok && cond;
  };

  SyntheticScene scene = render(spec);
  PropertySet set = derive_all(scene.rgb, scene.depth, scene.intrinsics, DeriveConfig{});

  double grav_err = angle_deg(set.gravity.g, scene.gt_gravity);
  check(grav_err < 1.0, "gravity within 1 degree of ground truth (got " +
                            format_double(grav_err) + " deg)");

  // height / angle oracle away from surface discontinuities and border
  const PropertyMap& h = set.maps.at("H");
  const PropertyMap& a = set.maps.at("A");
  std::vector<uint8_t> mask = discontinuity_mask(scene, 6);
  double max_h_err = 0, max_a_err = 0;
  int checked = 0;
  for (int y = 8; y < scene.depth.height - 8; ++y) {
    for (int x = 8; x < scene.depth.width - 8; ++x) {
      size_t i = scene.depth.idx(x, y);
      if (mask[i] || !h.valid[i] || !a.valid[i]) continue;
      max_h_err = std::max(max_h_err, std::abs(h.values[i] - scene.gt_heights.values[i]));
      double gt_angle = angle_deg(scene.gt_normals.normals[i], scene.gt_gravity);
      max_a_err = std::max(max_a_err, std::abs(a.values[i] - gt_angle));
      ++checked;
    }
  }
  check(checked > 1000, "enough interior pixels checked");
  check(max_h_err < 1e-3, "height error < 1e-3 m (got " + format_double(max_h_err) + ")");
  check(max_a_err < 1.0, "angle error < 1 degree (got " + format_double(max_a_err) + ")");

  // disparity strictly order-reversing in depth
  const PropertyMap& d = set.maps.at("D");
  bool order_ok = true;
  for (size_t i = 0; i + 1 < d.pixel_count() && order_ok; i += 17) {
    size_t j = i + 1;
    if (!d.valid[i] || !d.valid[j]) continue;
    double zi = scene.depth.values[i], zj = scene.depth.values[j];
    if (zi < zj && !(d.values[i] > d.values[j])) order_ok = false;
    if (zi > zj && !(d.values[i] < d.values[j])) order_ok = false;
  }
  check(order_ok, "disparity strictly order-reversing in depth");

  log << (ok ? "self-test passed\n" : "self-test FAILED\n");
  if (!ok) throw NumericError("derive --self-test: oracle checks failed");
  return 0;
}

// ---- gen-synthetic --------------------------------------------------------

int cmd_gen_synthetic(const std::string& spec_path, int n, const std::string& out,
                      int64_t seed_override, const std::string& from_manifest) {
  SceneSpec base;
  std::string config_json;
  if (!from_manifest.empty()) {
    RunManifest m = load_manifest(from_manifest);
    nlohmann::json j = nlohmann::json::parse(m.config_json);
    base = scene_spec_from_json(j.at("spec").dump());
    n = j.at("n").get<int>();
    config_json = m.config_json;
  } else {
    if (!fs::exists(spec_path)) throw DataError(spec_path + ": no such file");
    base = load_scene_spec(spec_path);
    if (seed_override >= 0) base.seed = static_cast<uint64_t>(seed_override);
    nlohmann::json j{{"spec", nlohmann::json::parse(scene_spec_to_json(base))}, {"n", n}};
    config_json = j.dump();
  }
  if (n <= 0) throw std::invalid_argument("gen-synthetic: --n must be positive");
  fs::create_directories(out);

  for (int i = 0; i < n; ++i) {
    SceneSpec spec = sample_scene_spec(base, i);
    SyntheticScene scene = render(spec);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "scene_%04d", i);
    save_color(scene.rgb, (fs::path(out) / (std::string(stem) + ".ppm")).string());
    save_depth(scene.depth, (fs::path(out) / (std::string(stem) + ".pgm")).string());

    nlohmann::json gt;
    gt["gravity"] = {scene.gt_gravity.x, scene.gt_gravity.y, scene.gt_gravity.z};
    gt["camera"] = {{"pitch_deg", spec.camera.pitch_deg},
                    {"yaw_deg", spec.camera.yaw_deg},
                    {"height_m", spec.camera.height_m}};
    auto boxes = nlohmann::json::array();
    for (const auto& b : scene.gt_boxes)
      boxes.push_back({{"class", object_class_names()[b.class_id]},
                       {"box", {b.box.x1, b.box.y1, b.box.x2, b.box.y2}}});
    gt["boxes"] = boxes;
    std::ofstream gt_out((fs::path(out) / (std::string(stem) + ".gt.json")).string());
    gt_out << gt.dump(2) << "\n";

    if (i == 0) save_intrinsics(scene.intrinsics, (fs::path(out) / "intrinsics.json").string());
  }
  write_run_manifest(out, "gen-synthetic", config_json, {base.seed});
  std::cout << "wrote " << n << " scenes to " << out << "\n";
  return 0;
}

// ---- train-fusion / extract-features / train-svm -------------------------

int cmd_train_fusion(const std::string& config_path, const std::string& fusion,
                     const std::string& ablation, const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::load(config_path);
  fs::create_directories(out);

  bool has_rgb = false;
  for (const auto& s : cfg.streams) has_rgb |= (s == "rgb");

  // one seed, one cell
  uint64_t seed = cfg.seeds.empty() ? 1 : cfg.seeds[0];
  SceneSpec base = cfg.base_scene;
  base.seed = seed;
  DeriveConfig derive_cfg;
  derive_cfg.normals = cfg.normals;
  derive_cfg.gravity = cfg.gravity;
  std::vector<SceneStreams> scenes;
  for (int i = 0; i < cfg.train_scenes; ++i) {
    SceneSpec spec = sample_scene_spec(base, i);
    SyntheticScene scene = render(spec);
    PropertySet props = derive_all(scene.rgb, scene.depth, scene.intrinsics, derive_cfg);
    scenes.push_back(build_scene_streams(scene, props, cfg.streams));
  }
  PatchDataset patches =
      make_patch_dataset(scenes, cfg.streams, cfg.patch, cfg.per_class, hash_mix(seed, fnv1a64("patches")));

  NetworkConfig nc;
  nc.stream_names = cfg.streams;
  nc.in_channels = has_rgb ? 3 : 1;
  nc.patch = cfg.patch;
  nc.classes = kNumObjectClasses + 1;
  nc.conv_channels = cfg.conv_channels;
  nc.fc1_width = cfg.fc1_width;
  nc.kernel = cfg.kernel;
  nc.fusion = fusion_point_from_string(fusion);
  nc.ablation = ablation_from_string(ablation);
  nc.warm_start = cfg.warm_start;
  nc.seed = seed;
  TrainParams tp = cfg.train;
  tp.seed = hash_mix(seed, fnv1a64("sgd"));

  TrainedNetwork trained = train_network(nc, patches, tp);
  save_network(trained.net, (fs::path(out) / "net.fnet").string());
  write_trace_csv(trained.state, (fs::path(out) / "trace.csv").string());
  write_run_manifest(out, "train-fusion", nc.to_json(), {seed});
  const TraceRow& last = trained.state.trace.back();
  std::cout << "trained " << ablation << "/" << fusion << ": final loss "
            << format_double(last.loss) << ", val acc " << format_double(last.val_acc) << "\n";
  return 0;
}

// Features for grid proposals (or a proposals file) over generated scenes.
int cmd_extract_features(const std::string& net_path, const std::string& config_path,
                         const std::string& proposals_path, const std::string& out) {
  Network net = load_network(net_path);
  ExperimentConfig cfg = ExperimentConfig::load(config_path);
  fs::create_directories(fs::path(out).parent_path().empty() ? "." : fs::path(out).parent_path().string());

  uint64_t seed = cfg.seeds.empty() ? 1 : cfg.seeds[0];
  SceneSpec base = cfg.base_scene;
  base.seed = seed;
  DeriveConfig derive_cfg;
  derive_cfg.normals = cfg.normals;
  derive_cfg.gravity = cfg.gravity;

  std::vector<ProposalSet> prop_sets;
  std::vector<std::vector<double>> features;
  for (int i = 0; i < cfg.test_scenes; ++i) {
    SceneSpec spec = sample_scene_spec(base, 100000 + i);
    SyntheticScene scene = render(spec);
    PropertySet props = derive_all(scene.rgb, scene.depth, scene.intrinsics, derive_cfg);
    SceneStreams streams = build_scene_streams(scene, props, cfg.streams);

    ProposalSet set;
    char frame[32];
    std::snprintf(frame, sizeof(frame), "scene_%04d", i);
    if (!proposals_path.empty()) {
      auto all = load_proposals(proposals_path);
      if (static_cast<size_t>(i) >= all.size())
        throw DataError(proposals_path + ": fewer frames than scenes");
      set = all[i];
    } else {
      std::set<std::array<int, 4>> seen;
      for (const auto& g : cfg.proposal_groups) {
        ProposalSet part = grid_proposals(streams.width, streams.height, g.scales, g.strides,
                                          g.ratios);
        for (const auto& b : part.boxes)
          if (seen.insert({b.x1, b.y1, b.x2, b.y2}).second) set.boxes.push_back(b);
      }
    }
    set.frame = frame;

    std::vector<Sample> samples;
    for (const BoundingBox& b : set.boxes) {
      int side = std::max(b.x2 - b.x1 + 1, b.y2 - b.y1 + 1);
      side = std::min({side, streams.width, streams.height});
      int cx = (b.x1 + b.x2) / 2, cy = (b.y1 + b.y2) / 2;
      int x1 = std::clamp(cx - side / 2, 0, streams.width - side);
      int y1 = std::clamp(cy - side / 2, 0, streams.height - side);
      Sample s;
      for (const ByteMap& bm : streams.streams)
        s.push_back(crop_stream_patch(bm, {x1, y1, x1 + side - 1, y1 + side - 1}, cfg.patch));
      samples.push_back(std::move(s));
    }
    auto feats = extract_features_batch(net, "fc1", samples);
    features.insert(features.end(), feats.begin(), feats.end());
    prop_sets.push_back(std::move(set));
  }

  size_t d = features.empty() ? 0 : features[0].size();
  std::ofstream bin(out, std::ios::binary);
  if (!bin.good()) throw DataError(out + ": cannot open for writing");
  bin.write("FEAT", 4);
  uint32_t n32 = static_cast<uint32_t>(features.size()), d32 = static_cast<uint32_t>(d);
  bin.write(reinterpret_cast<const char*>(&n32), 4);
  bin.write(reinterpret_cast<const char*>(&d32), 4);
  for (const auto& f : features)
    bin.write(reinterpret_cast<const char*>(f.data()),
              static_cast<std::streamsize>(f.size() * sizeof(double)));
  save_proposals(prop_sets, out + ".boxes.jsonl");
  std::cout << "extracted " << features.size() << " features of dim " << d << "\n";
  return 0;
}

int cmd_train_svm(const std::string& features_path, const std::string& labels_path, double C,
                  double B, double w1, const std::string& out) {
  std::ifstream bin(features_path, std::ios::binary);
  if (!bin.good()) throw DataError(features_path + ": cannot open");
  char magic[4];
  bin.read(magic, 4);
  if (!bin.good() || std::string_view(magic, 4) != "FEAT")
    throw DataError(features_path + ": bad magic");
  uint32_t n = 0, d = 0;
  bin.read(reinterpret_cast<char*>(&n), 4);
  bin.read(reinterpret_cast<char*>(&d), 4);
  std::vector<double> features(static_cast<size_t>(n) * d);
  bin.read(reinterpret_cast<char*>(features.data()),
           static_cast<std::streamsize>(features.size() * sizeof(double)));
  if (!bin.good()) throw DataError(features_path + ": truncated payload");

  std::ifstream lab(labels_path);
  if (!lab.good()) throw DataError(labels_path + ": cannot open");
  std::vector<int> labels;
  int y;
  while (lab >> y) labels.push_back(y);
  if (labels.size() != n) throw DataError(labels_path + ": label count does not match features");

  SvmConfig cfg;
  cfg.C = C;
  cfg.B = B;
  cfg.w1 = w1;
  SvmModel model = train_svm(features, n, d, labels, cfg);
  save_svm(model, out);
  std::cout << "trained svm: " << model.passes << " passes, objective "
            << format_double(model.objective) << "\n";
  return 0;
}

// ---- eval-detect ----------------------------------------------------------

int cmd_eval_detect(const std::string& dets_path, const std::string& gt_path, double iou_thresh,
                    double nms_thresh, const std::string& out) {
  std::map<std::string, std::map<std::string, FrameEval>> by_class;  // class -> frame -> eval

  {
    std::ifstream in(gt_path);
    if (!in.good()) throw DataError(gt_path + ": cannot open");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line);
      std::string frame = j.at("frame").get<std::string>();
      for (const auto& b : j.at("boxes")) {
        std::string cls = b.at("class").get<std::string>();
        const auto& bb = b.at("box");
        by_class[cls][frame].gt.push_back(
            {bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()});
      }
    }
  }
  {
    std::ifstream in(dets_path);
    if (!in.good()) throw DataError(dets_path + ": cannot open");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line);
      std::string frame = j.at("frame").get<std::string>();
      for (const auto& d : j.at("dets")) {
        std::string cls = d.at("class").get<std::string>();
        const auto& bb = d.at("box");
        Detection det;
        det.box = {bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
        det.score = d.at("score").get<double>();
        by_class[cls][frame].detections.push_back(det);
      }
    }
  }

  fs::create_directories(out);
  std::ofstream ap_csv((fs::path(out) / "ap.csv").string());
  ap_csv << "class,AP\n";
  for (auto& [cls, frames_map] : by_class) {
    std::vector<FrameEval> frames;
    for (auto& [frame, fe] : frames_map) {
      if (nms_thresh > 0) fe.detections = nms(fe.detections, nms_thresh);
      frames.push_back(fe);
    }
    auto ap = average_precision(frames, iou_thresh);
    ap_csv << cls << "," << (ap ? format_double(*ap) : "n/a") << "\n";

    auto pr = precision_recall_points(frames, iou_thresh);
    std::ofstream pr_csv((fs::path(out) / ("pr_" + cls + ".csv")).string());
    pr_csv << "recall,precision\n";
    for (const auto& [r, p] : pr) pr_csv << format_double(r) << "," << format_double(p) << "\n";
  }
  nlohmann::json cfg{{"dets", dets_path}, {"gt", gt_path}, {"iou", iou_thresh}, {"nms", nms_thresh}};
  write_run_manifest(out, "eval-detect", cfg.dump(), {});
  std::cout << "wrote ap.csv and PR curves to " << out << "\n";
  return 0;
}

// ---- fusion-sweep ----------------------------------------------------------

int cmd_fusion_sweep(const std::string& config_path, const std::string& from_manifest,
                     const std::string& out_override, const std::string& seeds_override,
                     int jobs_override, bool quiet) {
  ExperimentConfig cfg;
  if (!from_manifest.empty()) {
    RunManifest m = load_manifest(from_manifest);
    cfg = ExperimentConfig::from_json(m.config_json);
  } else {
    if (config_path.empty()) throw std::invalid_argument("fusion-sweep: need --config or --from-manifest");
    cfg = ExperimentConfig::load(config_path);
  }
  if (!out_override.empty()) cfg.out = out_override;
  if (!seeds_override.empty()) {
    cfg.seeds.clear();
    std::istringstream ss(seeds_override);
    std::string tok;
    while (std::getline(ss, tok, ',')) cfg.seeds.push_back(std::stoull(tok));
  }
  if (jobs_override > 0) cfg.jobs = jobs_override;
  if (cfg.seeds.empty()) throw std::invalid_argument("fusion-sweep: seeds must be non-empty");

  SweepResult result = run_fusion_experiment(cfg, quiet ? nullptr : &std::cout);
  write_sweep_outputs(result, cfg.out);
  write_run_manifest(cfg.out, "fusion-sweep", cfg.to_json(), cfg.seeds);
  std::cout << "sweep complete: " << result.rows.size() << " result rows in " << cfg.out << "\n";
  return 0;
}

// ---- plot -------------------------------------------------------------------

int cmd_plot(const std::string& results_dir, const std::string& out) {
  fs::create_directories(out);
  bool produced = false;

  fs::path summary = fs::path(results_dir) / "summary.csv";
  if (fs::exists(summary)) {
    // mean AP per (ablation, fusion) cell from the class == "mean" rows
    std::ifstream in(summary);
    std::string line;
    std::getline(in, line);  // header
    std::map<std::string, std::map<std::string, double>> cells;
    std::set<std::string> fusions;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::string abl, fus, cls, mean_ap, std_ap;
      std::getline(ss, abl, ',');
      std::getline(ss, fus, ',');
      std::getline(ss, cls, ',');
      std::getline(ss, mean_ap, ',');
      std::getline(ss, std_ap, ',');
      if (cls != "mean") continue;
      cells[abl][fus] = std::stod(mean_ap);
      fusions.insert(fus);
    }
    if (!cells.empty()) {
      std::vector<std::string> rows, cols(fusions.begin(), fusions.end());
      std::vector<double> values;
      for (const auto& [abl, m] : cells) rows.push_back(abl);
      for (const auto& [abl, m] : cells)
        for (const auto& col : cols) {
          auto it = m.find(col);
          values.push_back(it == m.end() ? 0.0 : it->second);
        }
      write_table_heatmap_ppm(rows, cols, values, (fs::path(out) / "summary_heatmap.ppm").string());
      produced = true;
    }
  }

  for (const auto& entry : fs::directory_iterator(results_dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("pr_", 0) != 0 || entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path());
    std::string line;
    std::getline(in, line);
    std::vector<std::pair<double, double>> pr;
    while (std::getline(in, line)) {
      auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      pr.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    }
    write_pr_curve_ppm(pr, (fs::path(out) / (entry.path().stem().string() + ".ppm")).string());
    produced = true;
  }

  if (!produced) throw DataError(results_dir + ": nothing to plot (no summary.csv or pr_*.csv)");
  std::cout << "plots written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geocentric RGB-D property maps and multi-stream fusion experiments"};
  app.require_subcommand(1);

  // derive
  DeriveArgs d;
  auto* derive = app.add_subcommand("derive", "derive D/H/A/contour maps from RGB-D frames");
  derive->add_option("--rgb", d.rgb, "color image (binary P6 PPM)");
  derive->add_option("--depth", d.depth, "depth image (16-bit P5 PGM, millimeters)");
  derive->add_option("--in", d.in_dir, "directory of paired .ppm/.pgm frames");
  derive->add_option("--intrinsics", d.intrinsics, "camera intrinsics JSON");
  derive->add_option("--out", d.out, "output directory")->required();
  derive->add_option("--contour", d.contour, "precomputed contour map (PMAP or 8-bit PGM)");
  derive->add_option("--window", d.window, "normal estimation window (odd, >= 3)");
  derive->add_option("--depth-gap", d.depth_gap, "relative depth-gap neighbor rejection");
  derive->add_option("--schedule", d.schedule, "gravity schedule, e.g. 45:3,15:3");
  derive->add_option("--percentile", d.percentile, "ground percentile (0 = minimum)");
  derive->add_flag("--camera-y", d.camera_y, "height along raw camera Y instead of gravity");
  derive->add_flag("--self-test", d.self_test, "run analytic oracles on synthetic scenes");

  // gen-synthetic
  std::string gs_spec, gs_out, gs_manifest;
  int gs_n = 10;
  int64_t gs_seed = -1;
  auto* gen = app.add_subcommand("gen-synthetic", "render synthetic RGB-D scenes with ground truth");
  gen->add_option("--spec", gs_spec, "scene spec JSON");
  gen->add_option("--n", gs_n, "number of scenes");
  gen->add_option("--out", gs_out, "output directory")->required();
  gen->add_option("--seed", gs_seed, "override base seed");
  gen->add_option("--from-manifest", gs_manifest, "reproduce a previous run");

  // train-fusion
  std::string tf_config, tf_fusion = "final", tf_ablation = "full", tf_out;
  auto* tf = app.add_subcommand("train-fusion", "train one fusion network on synthetic patches");
  tf->add_option("--config", tf_config, "experiment config JSON")->required();
  tf->add_option("--fusion", tf_fusion, "input|pool2|fc1|fc2|final");
  tf->add_option("--ablation", tf_ablation, "full|conv+pool|conv|conv+relu");
  tf->add_option("--out", tf_out, "output directory")->required();

  // extract-features
  std::string ef_net, ef_config, ef_props, ef_out;
  auto* ef = app.add_subcommand("extract-features", "extract fc1 features for proposals");
  ef->add_option("--net", ef_net, "trained network (.fnet)")->required();
  ef->add_option("--config", ef_config, "experiment config JSON")->required();
  ef->add_option("--proposals", ef_props, "proposals JSONL (default: grid)");
  ef->add_option("--out", ef_out, "output features file")->required();

  // train-svm
  std::string ts_features, ts_labels, ts_out;
  double ts_C = 0.001, ts_B = 10.0, ts_w1 = 2.0;
  auto* ts = app.add_subcommand("train-svm", "train a weighted linear SVM on a feature file");
  ts->add_option("--features", ts_features, "FEAT binary from extract-features")->required();
  ts->add_option("--labels", ts_labels, "one +1/-1 label per line")->required();
  ts->add_option("--C", ts_C, "regularization trade-off");
  ts->add_option("--B", ts_B, "bias feature scale");
  ts->add_option("--w1", ts_w1, "positive-class weight");
  ts->add_option("--out", ts_out, "output model file")->required();

  // eval-detect
  std::string ed_dets, ed_gt, ed_out;
  double ed_iou = 0.5, ed_nms = 0.3;
  auto* ed = app.add_subcommand("eval-detect", "evaluate detections against ground truth");
  ed->add_option("--dets", ed_dets, "detections JSONL")->required();
  ed->add_option("--gt", ed_gt, "ground-truth JSONL")->required();
  ed->add_option("--iou", ed_iou, "true-positive IoU threshold");
  ed->add_option("--nms", ed_nms, "NMS threshold applied per frame/class (0 = off)");
  ed->add_option("--out", ed_out, "output directory")->required();

  // fusion-sweep
  std::string fsw_config, fsw_manifest, fsw_out, fsw_seeds;
  int fsw_jobs = 0;
  bool fsw_quiet = false;
  auto* fsw = app.add_subcommand("fusion-sweep", "run the fusion-point/ablation study");
  fsw->add_option("--config", fsw_config, "experiment config JSON");
  fsw->add_option("--from-manifest", fsw_manifest, "reproduce a previous run");
  fsw->add_option("--out", fsw_out, "override output directory");
  fsw->add_option("--seeds", fsw_seeds, "override seeds, comma separated");
  fsw->add_option("--jobs", fsw_jobs, "concurrent cells");
  fsw->add_flag("--quiet", fsw_quiet, "suppress progress lines");

  // plot
  std::string pl_results, pl_out;
  auto* pl = app.add_subcommand("plot", "render PR curves and table heatmaps from results");
  pl->add_option("--results", pl_results, "results directory")->required();
  pl->add_option("--out", pl_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors are exit 1; help/version exit 0
  }

  try {
    if (derive->parsed()) return cmd_derive(d);
    if (gen->parsed()) return cmd_gen_synthetic(gs_spec, gs_n, gs_out, gs_seed, gs_manifest);
    if (tf->parsed()) return cmd_train_fusion(tf_config, tf_fusion, tf_ablation, tf_out);
    if (ef->parsed()) return cmd_extract_features(ef_net, ef_config, ef_props, ef_out);
    if (ts->parsed()) return cmd_train_svm(ts_features, ts_labels, ts_C, ts_B, ts_w1, ts_out);
    if (ed->parsed()) return cmd_eval_detect(ed_dets, ed_gt, ed_iou, ed_nms, ed_out);
    if (fsw->parsed())
      return cmd_fusion_sweep(fsw_config, fsw_manifest, fsw_out, fsw_seeds, fsw_jobs, fsw_quiet);
    if (pl->parsed()) return cmd_plot(pl_results, pl_out);
  } catch (const NumericError& e) {
    std::cerr << "rgbd: numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "rgbd: data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "rgbd: usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "rgbd: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
