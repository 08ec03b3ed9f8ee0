// End-to-end runner checks at smoke scale: table shapes, value ranges, and
// reproducibility of the experiment outputs.

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "rgbd/experiment.hpp"

using namespace rgbd;

namespace {

ExperimentConfig smoke_config() {
  ExperimentConfig cfg;
  cfg.seeds = {11};
  cfg.train_scenes = 2;
  cfg.test_scenes = 2;
  cfg.per_class = 8;
  cfg.train.epochs = 2;
  cfg.conv_channels = {4, 6};
  cfg.fc1_width = 16;
  cfg.max_negatives = 120;
  cfg.base_scene.image_width = 96;
  cfg.base_scene.image_height = 72;
  cfg.proposal_groups = {{{16, 22}, {8, 11}, {0.5, 1.0, 2.0}}};
  cfg.table1 = false;
  cfg.table2 = true;
  cfg.table3 = false;
  cfg.warm_start = false;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("fusion sweep emits well-formed tables and is reproducible") {
  ExperimentConfig cfg = smoke_config();
  SweepResult result = run_fusion_experiment(cfg);

  // five fusion cells for the full architecture, one seed
  CHECK(result.cell_mean_ap.size() == 5);
  for (const auto& [cell, aps] : result.cell_mean_ap) {
    CHECK(aps.size() == 1);
    for (double ap : aps) {
      CHECK(ap >= 0.0);
      CHECK(ap <= 1.0);
    }
  }
  // rows: per cell, 3 classes + mean
  CHECK(result.rows.size() == 5 * 4);

  std::string dir = test::scratch_path("sweep_out");
  write_sweep_outputs(result, dir);
  namespace fs = std::filesystem;
  CHECK(fs::exists(fs::path(dir) / "results.csv"));
  CHECK(fs::exists(fs::path(dir) / "summary.csv"));
  CHECK(fs::exists(fs::path(dir) / "table2.csv"));
  CHECK_FALSE(fs::exists(fs::path(dir) / "table1.csv"));

  std::string table2 = slurp(fs::path(dir) / "table2.csv");
  CHECK(table2.find("fused_level,final,fc2,fc1,pool2,input") == 0);

  // the same config reproduces identical outputs
  SweepResult again = run_fusion_experiment(cfg);
  std::string dir2 = test::scratch_path("sweep_out");
  write_sweep_outputs(again, dir2);
  CHECK(slurp(fs::path(dir) / "results.csv") == slurp(fs::path(dir2) / "results.csv"));
  CHECK(slurp(fs::path(dir) / "summary.csv") == slurp(fs::path(dir2) / "summary.csv"));
}

TEST_CASE("experiment config JSON round trips") {
  ExperimentConfig cfg = smoke_config();
  cfg.seeds = {3, 5, 8};
  cfg.svm.C = 0.25;
  cfg.no_pool_lr_scale = 0.2;
  ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.seeds == cfg.seeds);
  CHECK(back.train_scenes == cfg.train_scenes);
  CHECK(back.per_class == cfg.per_class);
  CHECK(back.svm.C == doctest::Approx(0.25));
  CHECK(back.no_pool_lr_scale == doctest::Approx(0.2));
  CHECK(back.conv_channels == cfg.conv_channels);
  REQUIRE(back.proposal_groups.size() == 1);
  CHECK(back.proposal_groups[0].scales == cfg.proposal_groups[0].scales);
  CHECK(back.table2 == true);
  CHECK(back.base_scene.image_width == 96);
  CHECK(back.to_json() == cfg.to_json());  // canonical dump is stable
  CHECK_THROWS_AS(ExperimentConfig::from_json("{nope"), DataError);
}
