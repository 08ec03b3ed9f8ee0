#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "rgbd/fusionnet.hpp"
#include "rgbd/svm.hpp"
#include "rgbd/synth.hpp"

namespace rgbd {

// End-to-end fusion study on synthetic scenes: per (ablation x fusion
// point) cell and seed, train the nets, cache features, train one-vs-rest
// SVMs, score grid proposals on held-out scenes, NMS, and AP per class.

struct ExperimentConfig {
  std::string out = "results";
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  int jobs = 1;  // concurrent cells (isolated seeds/state)

  // scene generation
  SceneSpec base_scene = default_experiment_scene();
  int train_scenes = 5;
  int test_scenes = 5;

  static SceneSpec default_experiment_scene();

  // streams & patches
  std::vector<std::string> streams = {"disparity", "height", "angle"};
  int patch = 32;
  int per_class = 30;

  // derivation
  NormalParams normals;
  GravityParams gravity;

  // network & training
  std::vector<int> conv_channels = {8, 16};
  int fc1_width = 64;
  int kernel = 5;
  bool warm_start = true;  // Fc1/Fc2 cells start from per-stream nets
  TrainParams train;
  double no_pool_lr_scale = 1.0;  // lr multiplier for the pool-free ablations
                                  // (their flattened fc1 is ~20x wider)

  // classifier
  SvmConfig svm;
  int max_negatives = 800;  // per class, seeded subsample

  // proposals & evaluation; each group pairs scales/strides with the
  // aspect ratios it covers, so thin windows are only laid down at the
  // scales where those objects occur
  struct ProposalGridGroup {
    std::vector<int> scales, strides;
    std::vector<double> ratios;
  };
  std::vector<ProposalGridGroup> proposal_groups = {
      {{18, 24}, {7, 9}, {1.0}},
      {{24, 32}, {8, 11}, {0.32}},
      {{22, 29}, {8, 11}, {2.3}},
  };
  double nms_threshold = 0.3;
  double eval_iou = 0.5;

  bool table1 = true;  // ablations x {input, final}
  bool table2 = true;  // full x {final, fc2, fc1, pool2, input}
  bool table3 = false; // full: input vs final vs final+PCA

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
};

struct ResultRow {
  std::string ablation;      // "full", "conv+pool", ...
  std::string fusion_point;  // "input", ..., "final", "final_pca"
  uint64_t seed = 0;
  std::string class_name;    // object class or "mean"
  double ap = 0;
};

struct SweepResult {
  ExperimentConfig config;
  std::vector<ResultRow> rows;

  // mean AP (over classes) per cell and seed, keyed "ablation/fusion"
  std::map<std::string, std::vector<double>> cell_mean_ap;
};

SweepResult run_fusion_experiment(const ExperimentConfig& config, std::ostream* progress = nullptr);

// results.csv, summary.csv and the table CSVs under `dir`.
void write_sweep_outputs(const SweepResult& result, const std::string& dir);

}  // namespace rgbd
