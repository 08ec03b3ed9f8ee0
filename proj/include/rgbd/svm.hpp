#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgbd/common.hpp"

namespace rgbd {

// Weighted linear SVM trained by dual coordinate descent on the L1-hinge
// dual. The bias is realized as a constant feature of value B appended to
// every example, so the hyper-parameter triple (C, B, w1) acts exactly as
// in the reference tool: positives carry weight w1, negatives weight 1.
//
//   min_w 1/2 ||w||^2 + C sum_i c_i max(0, 1 - y_i w . (x_i, B))

struct SvmConfig {
  double C = 0.001;
  double B = 10.0;
  double w1 = 2.0;       // positive-class instance weight
  double tol = 1e-4;     // relative duality gap
  int max_passes = 10000;
  uint64_t seed = 7;     // coordinate-order shuffling
};

struct SvmModel {
  std::vector<double> w;  // length d
  double bias_w = 0;      // weight on the appended B feature
  double B = 10.0;
  double C = 0.001, w1 = 2.0;  // hyper-parameters used at training time
  int passes = 0;
  double objective = 0;                 // primal value at the returned w
  std::vector<double> dual_trace;       // solver objective after each outer pass
                                        // (0.5 a^T Q a - e^T a; non-increasing)
};

// features: n x d row-major; labels in {+1, -1}, both classes present.
SvmModel train_svm(const std::vector<double>& features, size_t n, size_t d,
                   const std::vector<int>& labels, const SvmConfig& config = {});

double svm_score(const SvmModel& model, const std::vector<double>& x);
double svm_primal_objective(const SvmModel& model, const std::vector<double>& features, size_t n,
                            const std::vector<int>& labels, const SvmConfig& config);

// One-vs-rest: per class, a binary model over the given multi-class labels.
std::vector<SvmModel> train_one_vs_rest(const std::vector<double>& features, size_t n, size_t d,
                                        const std::vector<int>& class_labels, int n_classes,
                                        const SvmConfig& config = {});

// Model file: magic "SVMW", JSON header (d, C, B, w1), f64 weights + bias weight.
void save_svm(const SvmModel& model, const std::string& path);
SvmModel load_svm(const std::string& path);

}  // namespace rgbd
