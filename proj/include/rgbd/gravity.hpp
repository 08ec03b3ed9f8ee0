#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rgbd/geometry.hpp"

namespace rgbd {

// Iterative gravity-direction estimation from surface normals. Starting
// from the camera Y axis, each step buckets normals into a set nearly
// parallel to the current estimate and a set nearly perpendicular to it,
// then re-solves for the direction that is aligned with the first set and
// orthogonal to the second.

struct NormalPartition {
  std::vector<Vec3> aligned;     // angle to g within d of 0 or 180 degrees
  std::vector<Vec3> orthogonal;  // angle to g within d of 90 degrees
};

struct GravityStep {
  double threshold_deg = 0;
  size_t n_aligned = 0;
  size_t n_orthogonal = 0;
  double objective = 0;  // sum sin^2 over aligned + sum cos^2 over orthogonal, at g
  Vec3 g{};
  bool non_unique = false;       // eigen-solve had no unique minimizer; g kept
  bool empty_partition = false;  // both sets empty; g kept
};

struct GravityEstimate {
  Vec3 g{0, 1, 0};
  std::vector<GravityStep> steps;

  bool any_non_unique() const;
  std::string trace_json() const;  // audit dump of the full iteration trace
};

using GravitySchedule = std::vector<std::pair<double, int>>;  // (threshold deg, step count)

struct GravityParams {
  GravitySchedule schedule = {{45.0, 3}, {15.0, 3}};
  size_t max_normals = 20000;  // uniform subsample bound, seeded
  uint64_t seed = 12345;
};

// Band membership for threshold d (degrees, 0 < d <= 45): angles are
// arccos(clamp(n.g, -1, 1)); normals falling in neither band are dropped.
NormalPartition partition_normals(const std::vector<Vec3>& normals, const Vec3& g, double d);
NormalPartition partition_normals(const NormalMap& normals, const Vec3& g, double d);

// Minimizes sum_{aligned} sin^2(theta) + sum_{orthogonal} cos^2(theta) over
// unit g: the smallest-eigenvalue eigenvector of
//   M = sum_orth n n^T - sum_aligned n n^T,
// sign-fixed so g . g_prev >= 0. A repeated smallest eigenvalue (within
// 1e-9) has no unique minimizer: g_prev is returned and flagged.
struct GravityStepResult {
  Vec3 g{};
  bool non_unique = false;
};
GravityStepResult solve_gravity_step(const NormalPartition& p, const Vec3& g_prev);

double gravity_objective(const NormalPartition& p, const Vec3& g);

GravityEstimate estimate_gravity(const NormalMap& normals, const GravityParams& params = {});
GravityEstimate estimate_gravity(const std::vector<Vec3>& normals, const GravityParams& params = {});

}  // namespace rgbd
