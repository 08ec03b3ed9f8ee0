#pragma once

#include <string>
#include <vector>

#include "rgbd/common.hpp"

namespace rgbd {

// PCA used as the dimensionality control in the stream-separation study.
// Fitting goes through the d x d covariance when d <= 4096, otherwise
// through the n x n Gram matrix.

struct PcaModel {
  size_t d = 0, k = 0;
  std::vector<double> mean;               // length d
  std::vector<double> basis;              // k x d, orthonormal rows
  std::vector<double> variance_fraction;  // length k, non-increasing
  bool rank_deficient = false;            // explained variance hit 1 before k

  const double* row(size_t i) const { return &basis[i * d]; }
};

// Rows of `features` are observations (n x d, row-major). Requires
// 1 <= k <= min(n-1, d). Basis rows follow a deterministic sign
// convention: the largest-magnitude entry is positive. Fitting uses the
// d x d covariance when d <= gram_threshold, the n x n Gram trick above.
PcaModel fit_pca(const std::vector<double>& features, size_t n, size_t d, size_t k,
                 size_t gram_threshold = 4096);

// (x - mean) . basis^T for each row; returns n x k row-major.
std::vector<double> pca_project(const PcaModel& model, const std::vector<double>& features,
                                size_t n);

// Flat binary with a JSON header (d, k, variance fractions).
void save_pca(const PcaModel& model, const std::string& path);
PcaModel load_pca(const std::string& path);

}  // namespace rgbd
