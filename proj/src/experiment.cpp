#include "rgbd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <array>
#include <atomic>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "json.hpp"
#include "rgbd/pca.hpp"

namespace rgbd {

namespace {

nlohmann::json scene_spec_json(const SceneSpec& s) { return nlohmann::json::parse(scene_spec_to_json(s)); }

}  // namespace

SceneSpec ExperimentConfig::default_experiment_scene() {
  SceneSpec spec;
  spec.image_width = 128;
  spec.image_height = 96;
  spec.room.width = 6;
  spec.room.length = 6;
  spec.noise.depth_sigma = 0.004;
  spec.noise.color_sigma = 10;
  spec.noise.depth_sigma = 0.003;
  spec.noise.color_sigma = 8;
  spec.randomize = SceneRandomization{};
  spec.randomize->objects_min = 4;
  spec.randomize->objects_max = 6;
  spec.randomize->pitch_min_deg = 12;
  spec.randomize->pitch_max_deg = 25;
  spec.randomize->size_jitter = 0.25;
  spec.randomize->size_scale = 1.2;
  spec.randomize->z_min = 1.4;
  spec.randomize->z_max = 2.4;
  spec.randomize->x_abs_max = 1.1;
  return spec;
}

std::string ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["out"] = out;
  j["seeds"] = seeds;
  j["jobs"] = jobs;
  j["scenes"] = {{"train", train_scenes}, {"test", test_scenes}, {"base", scene_spec_json(base_scene)}};
  j["streams"] = streams;
  j["patch"] = patch;
  j["per_class"] = per_class;
  j["normals"] = {{"window", normals.window}, {"max_rel_depth_gap", normals.max_rel_depth_gap}};
  nlohmann::json sched = nlohmann::json::array();
  for (const auto& [d, n] : gravity.schedule) sched.push_back({d, n});
  j["gravity"] = {{"schedule", sched}, {"max_normals", gravity.max_normals}, {"seed", gravity.seed}};
  j["network"] = {{"conv_channels", conv_channels},
                  {"fc1_width", fc1_width},
                  {"kernel", kernel},
                  {"warm_start", warm_start}};
  j["train"] = {{"lr0", train.lr0},           {"lr_decay_epochs", train.lr_decay_epochs},
                {"momentum", train.momentum},  {"batch", train.batch},
                {"epochs", train.epochs},      {"no_pool_lr_scale", no_pool_lr_scale}};
  j["svm"] = {{"C", svm.C}, {"B", svm.B}, {"w1", svm.w1}, {"tol", svm.tol},
              {"max_passes", svm.max_passes}, {"max_negatives", max_negatives}};
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : proposal_groups)
    groups.push_back({{"scales", g.scales}, {"strides", g.strides}, {"ratios", g.ratios}});
  j["proposals"] = groups;
  j["eval"] = {{"nms_threshold", nms_threshold}, {"iou_threshold", eval_iou}};
  j["tables"] = {{"table1", table1}, {"table2", table2}, {"table3", table3}};
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("experiment config: invalid JSON (") + e.what() + ")");
  }
  ExperimentConfig c;
  c.out = j.value("out", c.out);
  c.seeds = j.value("seeds", c.seeds);
  c.jobs = j.value("jobs", c.jobs);
  if (j.contains("scenes")) {
    c.train_scenes = j["scenes"].value("train", c.train_scenes);
    c.test_scenes = j["scenes"].value("test", c.test_scenes);
    if (j["scenes"].contains("base")) c.base_scene = scene_spec_from_json(j["scenes"]["base"].dump());
  }
  c.streams = j.value("streams", c.streams);
  c.patch = j.value("patch", c.patch);
  c.per_class = j.value("per_class", c.per_class);
  if (j.contains("normals")) {
    c.normals.window = j["normals"].value("window", c.normals.window);
    c.normals.max_rel_depth_gap = j["normals"].value("max_rel_depth_gap", c.normals.max_rel_depth_gap);
  }
  if (j.contains("gravity")) {
    if (j["gravity"].contains("schedule")) {
      c.gravity.schedule.clear();
      for (const auto& p : j["gravity"]["schedule"])
        c.gravity.schedule.emplace_back(p.at(0).get<double>(), p.at(1).get<int>());
    }
    c.gravity.max_normals = j["gravity"].value("max_normals", c.gravity.max_normals);
    c.gravity.seed = j["gravity"].value("seed", c.gravity.seed);
  }
  if (j.contains("network")) {
    c.conv_channels = j["network"].value("conv_channels", c.conv_channels);
    c.fc1_width = j["network"].value("fc1_width", c.fc1_width);
    c.kernel = j["network"].value("kernel", c.kernel);
    c.warm_start = j["network"].value("warm_start", c.warm_start);
  }
  if (j.contains("train")) {
    c.train.lr0 = j["train"].value("lr0", c.train.lr0);
    c.train.lr_decay_epochs = j["train"].value("lr_decay_epochs", c.train.lr_decay_epochs);
    c.train.momentum = j["train"].value("momentum", c.train.momentum);
    c.train.batch = j["train"].value("batch", c.train.batch);
    c.train.epochs = j["train"].value("epochs", c.train.epochs);
    c.no_pool_lr_scale = j["train"].value("no_pool_lr_scale", c.no_pool_lr_scale);
  }
  if (j.contains("svm")) {
    c.svm.C = j["svm"].value("C", c.svm.C);
    c.svm.B = j["svm"].value("B", c.svm.B);
    c.svm.w1 = j["svm"].value("w1", c.svm.w1);
    c.svm.tol = j["svm"].value("tol", c.svm.tol);
    c.svm.max_passes = j["svm"].value("max_passes", c.svm.max_passes);
    c.max_negatives = j["svm"].value("max_negatives", c.max_negatives);
  }
  if (j.contains("proposals")) {
    c.proposal_groups.clear();
    for (const auto& g : j["proposals"]) {
      ProposalGridGroup group;
      group.scales = g.value("scales", std::vector<int>{});
      group.strides = g.value("strides", std::vector<int>{});
      group.ratios = g.value("ratios", std::vector<double>{1.0});
      c.proposal_groups.push_back(group);
    }
    if (c.proposal_groups.empty()) throw DataError("experiment config: no proposal groups");
  }
  if (j.contains("eval")) {
    c.nms_threshold = j["eval"].value("nms_threshold", c.nms_threshold);
    c.eval_iou = j["eval"].value("iou_threshold", c.eval_iou);
  }
  if (j.contains("tables")) {
    c.table1 = j["tables"].value("table1", c.table1);
    c.table2 = j["tables"].value("table2", c.table2);
    c.table3 = j["tables"].value("table3", c.table3);
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw DataError(path + ": cannot open");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

namespace {

// Everything one seed's cells share: rendered scenes, byte streams, patch
// dataset, proposal boxes, the per-class negative selections, and the crop
// tensors. Negatives are chosen by box overlap before any features exist,
// so only their union is ever pushed through a network. Immutable once
// built; cells may read it concurrently.
struct SeedData {
  std::vector<SceneStreams> train_streams, test_streams;
  std::vector<std::vector<BoundingBox>> train_props, test_props;  // per frame
  std::vector<std::vector<Sample>> test_prop_samples;
  std::vector<std::vector<Sample>> train_gt_samples;  // per frame, per gt box

  using FrameProp = std::pair<size_t, size_t>;  // (frame, proposal index)
  std::vector<std::vector<FrameProp>> negatives;  // per class, capped
  std::vector<FrameProp> neg_union;               // sorted unique
  std::map<FrameProp, size_t> neg_union_index;
  std::vector<Sample> neg_union_samples;

  PatchDataset patches;
};

std::vector<BoundingBox> grid_for(const ExperimentConfig& cfg, int w, int h) {
  std::vector<BoundingBox> all;
  std::set<std::array<int, 4>> seen;
  for (const auto& g : cfg.proposal_groups) {
    ProposalSet set = grid_proposals(w, h, g.scales, g.strides, g.ratios);
    for (const auto& b : set.boxes)
      if (seen.insert({b.x1, b.y1, b.x2, b.y2}).second) all.push_back(b);
  }
  return all;
}

std::vector<Sample> crop_samples(const SceneStreams& streams, const std::vector<BoundingBox>& boxes,
                                 int patch) {
  std::vector<Sample> out(boxes.size());
  for (size_t i = 0; i < boxes.size(); ++i) {
    BoundingBox crop = boxes[i];
    // square context window around the box, like the training patches
    int side = std::max(crop.x2 - crop.x1 + 1, crop.y2 - crop.y1 + 1);
    side = std::min({side, streams.width, streams.height});
    int cx = (crop.x1 + crop.x2) / 2, cy = (crop.y1 + crop.y2) / 2;
    int x1 = std::clamp(cx - side / 2, 0, streams.width - side);
    int y1 = std::clamp(cy - side / 2, 0, streams.height - side);
    BoundingBox sq{x1, y1, x1 + side - 1, y1 + side - 1};
    Sample s;
    for (const ByteMap& b : streams.streams) s.push_back(crop_stream_patch(b, sq, patch));
    out[i] = std::move(s);
  }
  return out;
}

SeedData build_seed_data(const ExperimentConfig& cfg, uint64_t seed, Exec exec) {
  SeedData data;
  SceneSpec base = cfg.base_scene;
  base.seed = seed;

  DeriveConfig derive_cfg;
  derive_cfg.normals = cfg.normals;
  derive_cfg.gravity = cfg.gravity;
  bool want_contour = false;
  for (const auto& s : cfg.streams) want_contour |= (s == "contour");
  derive_cfg.want_contour = want_contour;

  auto make_streams = [&](int index) {
    SceneSpec spec = sample_scene_spec(base, index);
    SyntheticScene scene = render(spec, exec);
    PropertySet props = derive_all(scene.rgb, scene.depth, scene.intrinsics, derive_cfg, exec);
    return build_scene_streams(scene, props, cfg.streams);
  };
  for (int i = 0; i < cfg.train_scenes; ++i) data.train_streams.push_back(make_streams(i));
  for (int i = 0; i < cfg.test_scenes; ++i) data.test_streams.push_back(make_streams(100000 + i));

  data.patches = make_patch_dataset(data.train_streams, cfg.streams, cfg.patch, cfg.per_class,
                                    hash_mix(seed, fnv1a64("patches")));

  for (const SceneStreams& sc : data.train_streams)
    data.train_props.push_back(grid_for(cfg, sc.width, sc.height));
  for (const SceneStreams& sc : data.test_streams) {
    data.test_props.push_back(grid_for(cfg, sc.width, sc.height));
    data.test_prop_samples.push_back(crop_samples(sc, data.test_props.back(), cfg.patch));
  }

  for (const SceneStreams& sc : data.train_streams) {
    std::vector<BoundingBox> boxes;
    for (const auto& g : sc.gt_boxes) boxes.push_back(g.box);
    data.train_gt_samples.push_back(crop_samples(sc, boxes, cfg.patch));
  }

  // Per-class negative sets: proposals overlapping that class's ground
  // truth below 0.3, capped by a seeded shuffle. Shared by every cell.
  data.negatives.resize(kNumObjectClasses);
  for (int c = 0; c < kNumObjectClasses; ++c) {
    std::vector<SeedData::FrameProp> negs;
    for (size_t fidx = 0; fidx < data.train_streams.size(); ++fidx) {
      const auto& gts = data.train_streams[fidx].gt_boxes;
      for (size_t p = 0; p < data.train_props[fidx].size(); ++p) {
        double best = 0;
        for (const auto& g : gts)
          if (g.class_id == c) best = std::max(best, iou(data.train_props[fidx][p], g.box));
        if (best < 0.3) negs.emplace_back(fidx, p);
      }
    }
    std::mt19937_64 rng(hash_mix(seed, fnv1a64("neg") + static_cast<uint64_t>(c)));
    std::shuffle(negs.begin(), negs.end(), rng);
    if (static_cast<int>(negs.size()) > cfg.max_negatives) negs.resize(cfg.max_negatives);
    data.negatives[c] = std::move(negs);
  }
  {
    std::set<SeedData::FrameProp> uniq;
    for (const auto& negs : data.negatives) uniq.insert(negs.begin(), negs.end());
    data.neg_union.assign(uniq.begin(), uniq.end());
    for (size_t i = 0; i < data.neg_union.size(); ++i)
      data.neg_union_index[data.neg_union[i]] = i;
    std::vector<std::vector<BoundingBox>> per_frame(data.train_streams.size());
    for (const auto& [fidx, p] : data.neg_union)
      per_frame[fidx].push_back(data.train_props[fidx][p]);
    for (size_t fidx = 0; fidx < per_frame.size(); ++fidx) {
      auto samples = crop_samples(data.train_streams[fidx], per_frame[fidx], cfg.patch);
      for (auto& smp : samples) data.neg_union_samples.push_back(std::move(smp));
    }
  }
  return data;
}

struct CellFeatures {
  size_t dim = 0;
  std::vector<std::vector<std::vector<double>>> train_gt;  // frame -> box -> feature
  std::vector<std::vector<double>> neg_union;              // aligned to SeedData::neg_union
  std::vector<std::vector<std::vector<double>>> test_props;
};

CellFeatures extract_cell_features(const Network& net, const SeedData& data, Exec exec) {
  CellFeatures f;
  for (const auto& frame : data.train_gt_samples)
    f.train_gt.push_back(extract_features_batch(net, "fc1", frame, exec));
  f.neg_union = extract_features_batch(net, "fc1", data.neg_union_samples, exec);
  for (const auto& frame : data.test_prop_samples)
    f.test_props.push_back(extract_features_batch(net, "fc1", frame, exec));
  for (const auto& frame : f.train_gt)
    for (const auto& feat : frame) f.dim = std::max(f.dim, feat.size());
  return f;
}

void pca_transform_features(CellFeatures* f, size_t k, std::ostream* progress) {
  // Fit on everything extracted from the training scenes.
  std::vector<double> matrix;
  size_t n = 0;
  auto append = [&](const std::vector<std::vector<std::vector<double>>>& set) {
    for (const auto& frame : set)
      for (const auto& feat : frame) {
        matrix.insert(matrix.end(), feat.begin(), feat.end());
        ++n;
      }
  };
  append(f->train_gt);
  for (const auto& feat : f->neg_union) {
    matrix.insert(matrix.end(), feat.begin(), feat.end());
    ++n;
  }
  if (k > f->dim) k = f->dim;
  PcaModel model = fit_pca(matrix, n, f->dim, std::min(k, n - 1));
  if (progress)
    *progress << "    pca: " << f->dim << " -> " << model.k << " dims\n";

  auto transform = [&](std::vector<std::vector<std::vector<double>>>* set) {
    for (auto& frame : *set)
      for (auto& feat : frame) feat = pca_project(model, feat, 1);
  };
  transform(&f->train_gt);
  for (auto& feat : f->neg_union) feat = pca_project(model, feat, 1);
  transform(&f->test_props);
  f->dim = model.k;
}

struct CellOutcome {
  std::map<std::string, double> class_ap;
  double mean_ap = 0;
};

CellOutcome classify_and_eval(const ExperimentConfig& cfg, const SeedData& data,
                              const CellFeatures& feats, uint64_t seed) {
  const size_t d = feats.dim;
  CellOutcome outcome;
  double ap_sum = 0;
  for (int c = 0; c < kNumObjectClasses; ++c) {
    // positives: ground-truth boxes of this class
    std::vector<double> x;
    std::vector<int> y;
    size_t n = 0;
    for (size_t fidx = 0; fidx < data.train_streams.size(); ++fidx) {
      const auto& gts = data.train_streams[fidx].gt_boxes;
      for (size_t b = 0; b < gts.size(); ++b) {
        if (gts[b].class_id != c) continue;
        x.insert(x.end(), feats.train_gt[fidx][b].begin(), feats.train_gt[fidx][b].end());
        y.push_back(1);
        ++n;
      }
    }
    if (n == 0) throw DataError("experiment: class missing from training scenes");

    // negatives: the seed-level per-class selection, via the union cache
    for (const auto& fp : data.negatives[c]) {
      const auto& feat = feats.neg_union[data.neg_union_index.at(fp)];
      x.insert(x.end(), feat.begin(), feat.end());
      y.push_back(-1);
      ++n;
    }

    SvmConfig svm_cfg = cfg.svm;
    svm_cfg.seed = hash_mix(seed, fnv1a64("svm") + static_cast<uint64_t>(c));
    SvmModel model = train_svm(x, n, d, y, svm_cfg);

    // score -> NMS -> AP over the held-out frames
    std::vector<FrameEval> frames;
    for (size_t fidx = 0; fidx < data.test_streams.size(); ++fidx) {
      FrameEval fe;
      std::vector<Detection> dets;
      for (size_t p = 0; p < data.test_props[fidx].size(); ++p) {
        Detection det;
        det.box = data.test_props[fidx][p];
        det.class_id = c;
        det.score = svm_score(model, feats.test_props[fidx][p]);
        dets.push_back(det);
      }
      fe.detections = nms(dets, cfg.nms_threshold);
      for (const auto& g : data.test_streams[fidx].gt_boxes)
        if (g.class_id == c) fe.gt.push_back(g.box);
      frames.push_back(std::move(fe));
    }
    auto ap = average_precision(frames, cfg.eval_iou);
    if (!ap) throw DataError("experiment: class missing from test scenes");
    outcome.class_ap[object_class_names()[c]] = *ap;
    ap_sum += *ap;
  }
  outcome.mean_ap = ap_sum / kNumObjectClasses;
  return outcome;
}

struct CellSpec {
  Ablation ablation;
  FusionPoint fusion;
};

}  // namespace

SweepResult run_fusion_experiment(const ExperimentConfig& config, std::ostream* progress) {
  SweepResult result;
  result.config = config;

  // Cell list: table 1 = ablations x {input, final}; table 2 adds the
  // middle fusion points for the full architecture. PCA control (table 3)
  // rides on the full/final cell.
  std::vector<CellSpec> cells;
  auto add_cell = [&](Ablation a, FusionPoint f) {
    for (const CellSpec& c : cells)
      if (c.ablation == a && c.fusion == f) return;
    cells.push_back({a, f});
  };
  if (config.table1 || config.table3) {
    for (Ablation a : {Ablation::Full, Ablation::ConvPool, Ablation::Conv, Ablation::ConvRelu}) {
      if (!config.table1 && a != Ablation::Full) continue;
      add_cell(a, FusionPoint::Input);
      add_cell(a, FusionPoint::Final);
    }
  }
  if (config.table2) {
    for (FusionPoint f : {FusionPoint::Final, FusionPoint::Fc2, FusionPoint::Fc1,
                          FusionPoint::Pool2, FusionPoint::Input})
      add_cell(Ablation::Full, f);
  }
  if (cells.empty()) throw DataError("experiment: no tables enabled");

  bool has_rgb = false;
  for (const auto& s : config.streams) has_rgb |= (s == "rgb");

  for (uint64_t seed : config.seeds) {
    if (progress) *progress << "seed " << seed << ": rendering and deriving scenes\n";
    const Exec exec = config.jobs > 1 ? Exec::Serial : Exec::Parallel;
    SeedData data = build_seed_data(config, seed, Exec::Parallel);

    struct CellRun {
      CellOutcome plain;
      CellOutcome pca;
      bool has_pca = false;
    };
    std::vector<CellRun> runs(cells.size());

    auto run_cell = [&](size_t ci) {
      const CellSpec& cell = cells[ci];
      NetworkConfig nc;
      nc.stream_names = config.streams;
      nc.in_channels = has_rgb ? 3 : 1;
      nc.patch = config.patch;
      nc.classes = kNumObjectClasses + 1;
      nc.conv_channels = config.conv_channels;
      nc.fc1_width = config.fc1_width;
      nc.kernel = config.kernel;
      nc.fusion = cell.fusion;
      nc.ablation = cell.ablation;
      nc.warm_start = config.warm_start;
      nc.seed = hash_mix(seed, fnv1a64(to_string(cell.ablation) + "/" + to_string(cell.fusion)));

      TrainParams tp = config.train;
      tp.seed = hash_mix(nc.seed, fnv1a64("sgd"));
      if (cell.ablation == Ablation::Conv || cell.ablation == Ablation::ConvRelu)
        tp.lr0 *= config.no_pool_lr_scale;
      TrainedNetwork trained = train_network(nc, data.patches, tp);

      CellFeatures feats = extract_cell_features(trained.net, data, exec);
      runs[ci].plain = classify_and_eval(config, data, feats, nc.seed);

      if (config.table3 && cell.ablation == Ablation::Full && cell.fusion == FusionPoint::Final) {
        pca_transform_features(&feats, static_cast<size_t>(config.fc1_width), nullptr);
        runs[ci].pca = classify_and_eval(config, data, feats, hash_mix(nc.seed, fnv1a64("pca")));
        runs[ci].has_pca = true;
      }
    };

    if (config.jobs > 1) {
      std::vector<std::thread> pool;
      std::atomic<size_t> next{0};
      int workers = std::min<int>(config.jobs, static_cast<int>(cells.size()));
      for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&]() {
          for (;;) {
            size_t ci = next.fetch_add(1);
            if (ci >= cells.size()) return;
            run_cell(ci);
          }
        });
      }
      for (auto& th : pool) th.join();
    } else {
      for (size_t ci = 0; ci < cells.size(); ++ci) {
        if (progress)
          *progress << "  cell " << to_string(cells[ci].ablation) << "/"
                    << to_string(cells[ci].fusion) << "\n";
        run_cell(ci);
      }
    }

    for (size_t ci = 0; ci < cells.size(); ++ci) {
      const CellSpec& cell = cells[ci];
      auto emit = [&](const std::string& fusion_name, const CellOutcome& o) {
        for (const auto& [cls, ap] : o.class_ap)
          result.rows.push_back({to_string(cell.ablation), fusion_name, seed, cls, ap});
        result.rows.push_back({to_string(cell.ablation), fusion_name, seed, "mean", o.mean_ap});
        result.cell_mean_ap[to_string(cell.ablation) + "/" + fusion_name].push_back(o.mean_ap);
      };
      emit(to_string(cell.fusion), runs[ci].plain);
      if (runs[ci].has_pca) emit("final_pca", runs[ci].pca);
    }
  }
  return result;
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

void write_sweep_outputs(const SweepResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream out(fs::path(dir) / "results.csv");
    if (!out.good()) throw DataError(dir + "/results.csv: cannot open for writing");
    out << "ablation,fusion_point,seed,class,AP\n";
    for (const ResultRow& r : result.rows)
      out << r.ablation << "," << r.fusion_point << "," << r.seed << "," << r.class_name << ","
          << format_double(r.ap) << "\n";
  }

  {
    // per-cell aggregate over seeds, separately per class
    std::map<std::string, std::vector<double>> agg;  // "abl,fus,class" -> APs
    for (const ResultRow& r : result.rows)
      agg[r.ablation + "," + r.fusion_point + "," + r.class_name].push_back(r.ap);
    std::ofstream out(fs::path(dir) / "summary.csv");
    if (!out.good()) throw DataError(dir + "/summary.csv: cannot open for writing");
    out << "ablation,fusion_point,class,mean_ap,std_ap\n";
    for (const auto& [key, aps] : agg)
      out << key << "," << format_double(mean_of(aps)) << "," << format_double(std_of(aps)) << "\n";
  }

  auto cell_mean = [&](const std::string& abl, const std::string& fus) {
    auto it = result.cell_mean_ap.find(abl + "/" + fus);
    return it == result.cell_mean_ap.end() ? 0.0 : mean_of(it->second);
  };

  if (result.config.table1) {
    std::ofstream out(fs::path(dir) / "table1.csv");
    if (!out.good()) throw DataError(dir + "/table1.csv: cannot open for writing");
    out << "ablation,input,final,gap\n";
    for (const char* abl : {"full", "conv+pool", "conv", "conv+relu"}) {
      double in = cell_mean(abl, "input");
      double fin = cell_mean(abl, "final");
      out << abl << "," << format_double(in) << "," << format_double(fin) << ","
          << format_double(fin - in) << "\n";
    }
  }

  if (result.config.table2) {
    std::ofstream out(fs::path(dir) / "table2.csv");
    if (!out.good()) throw DataError(dir + "/table2.csv: cannot open for writing");
    out << "fused_level,final,fc2,fc1,pool2,input\n";
    out << "mean_ap";
    for (const char* fus : {"final", "fc2", "fc1", "pool2", "input"})
      out << "," << format_double(cell_mean("full", fus));
    out << "\n";
    out << "std_ap";
    for (const char* fus : {"final", "fc2", "fc1", "pool2", "input"}) {
      auto it = result.cell_mean_ap.find(std::string("full/") + fus);
      out << ","
          << format_double(it == result.cell_mean_ap.end() ? 0.0 : std_of(it->second));
    }
    out << "\n";
  }

  if (result.config.table3) {
    std::ofstream out(fs::path(dir) / "table3.csv");
    if (!out.good()) throw DataError(dir + "/table3.csv: cannot open for writing");
    out << "variant,mean_ap,std_ap\n";
    for (const char* fus : {"input", "final", "final_pca"}) {
      auto it = result.cell_mean_ap.find(std::string("full/") + fus);
      std::vector<double> aps = it == result.cell_mean_ap.end() ? std::vector<double>{} : it->second;
      out << fus << "," << format_double(mean_of(aps)) << "," << format_double(std_of(aps)) << "\n";
    }
  }
}

}  // namespace rgbd
