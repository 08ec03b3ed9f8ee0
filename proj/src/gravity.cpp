#include "rgbd/gravity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace rgbd {

bool GravityEstimate::any_non_unique() const {
  for (const auto& s : steps)
    if (s.non_unique) return true;
  return false;
}

std::string GravityEstimate::trace_json() const {
  nlohmann::json j;
  j["g"] = {g.x, g.y, g.z};
  j["steps"] = nlohmann::json::array();
  for (const auto& s : steps) {
    j["steps"].push_back({{"threshold_deg", s.threshold_deg},
                          {"n_aligned", s.n_aligned},
                          {"n_orthogonal", s.n_orthogonal},
                          {"objective", s.objective},
                          {"g", {s.g.x, s.g.y, s.g.z}},
                          {"non_unique", s.non_unique},
                          {"empty_partition", s.empty_partition}});
  }
  return j.dump(2);
}

NormalPartition partition_normals(const std::vector<Vec3>& normals, const Vec3& g, double d) {
  if (!(d > 0.0 && d <= 45.0))
    throw std::invalid_argument("partition_normals: threshold must be in (0, 45] degrees");
  NormalPartition p;
  for (const Vec3& n : normals) {
    double theta = angle_deg(n, g);
    if (theta < d || theta > 180.0 - d)
      p.aligned.push_back(n);
    else if (theta > 90.0 - d && theta < 90.0 + d)
      p.orthogonal.push_back(n);
    // otherwise dropped: the band gap carries no constraint
  }
  return p;
}

NormalPartition partition_normals(const NormalMap& normals, const Vec3& g, double d) {
  std::vector<Vec3> ns;
  ns.reserve(normals.normals.size());
  for (size_t i = 0; i < normals.normals.size(); ++i)
    if (normals.valid[i]) ns.push_back(normals.normals[i]);
  return partition_normals(ns, g, d);
}

double gravity_objective(const NormalPartition& p, const Vec3& g) {
  double obj = 0;
  for (const Vec3& n : p.aligned) {
    double c = dot(n, g);
    obj += 1.0 - c * c;  // sin^2
  }
  for (const Vec3& n : p.orthogonal) {
    double c = dot(n, g);
    obj += c * c;  // cos^2
  }
  return obj;
}

GravityStepResult solve_gravity_step(const NormalPartition& p, const Vec3& g_prev) {
  if (p.aligned.empty() && p.orthogonal.empty())
    throw std::invalid_argument("solve_gravity_step: both partition sets are empty");

  // sin^2 = 1 - (n.g)^2 and cos^2 = (n.g)^2 turn the objective into
  // |aligned| + g^T M g with M below; the minimizer is M's bottom eigenvector.
  Mat3 m;
  for (const Vec3& n : p.orthogonal) m = m + outer(n, n);
  for (const Vec3& n : p.aligned) m = m - outer(n, n);

  SymEigen3 eig = sym_eigen3(m);
  if (eig.smallest_gap <= 1e-9) return {g_prev, true};

  Vec3 g = normalized(eig.vectors[0]);
  if (dot(g, g_prev) < 0) g = -g;
  return {g, false};
}

GravityEstimate estimate_gravity(const std::vector<Vec3>& normals, const GravityParams& params) {
  if (params.schedule.empty())
    throw std::invalid_argument("estimate_gravity: schedule must be non-empty");

  // Uniform seeded subsample keeps the quadratic form unbiased while
  // bounding runtime; indices are re-sorted so summation order is fixed.
  std::vector<Vec3> ns;
  if (normals.size() > params.max_normals && params.max_normals > 0) {
    std::vector<size_t> idx(normals.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::mt19937_64 rng(params.seed);
    for (size_t i = 0; i < params.max_normals; ++i) {
      std::uniform_int_distribution<size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(params.max_normals);
    std::sort(idx.begin(), idx.end());
    ns.reserve(idx.size());
    for (size_t i : idx) ns.push_back(normals[i]);
  } else {
    ns = normals;
  }

  GravityEstimate est;
  est.g = {0, 1, 0};  // camera Y axis
  for (const auto& [d, steps] : params.schedule) {
    for (int s = 0; s < steps; ++s) {
      NormalPartition p = partition_normals(ns, est.g, d);
      GravityStep step;
      step.threshold_deg = d;
      step.n_aligned = p.aligned.size();
      step.n_orthogonal = p.orthogonal.size();
      if (p.aligned.empty() && p.orthogonal.empty()) {
        step.empty_partition = true;
        step.objective = 0.0;
        step.g = est.g;
      } else {
        GravityStepResult r = solve_gravity_step(p, est.g);
        est.g = r.g;
        step.non_unique = r.non_unique;
        step.objective = gravity_objective(p, est.g);
        step.g = est.g;
      }
      est.steps.push_back(step);
    }
  }
  return est;
}

GravityEstimate estimate_gravity(const NormalMap& normals, const GravityParams& params) {
  std::vector<Vec3> ns;
  ns.reserve(normals.normals.size());
  for (size_t i = 0; i < normals.normals.size(); ++i)
    if (normals.valid[i]) ns.push_back(normals.normals[i]);
  return estimate_gravity(ns, params);
}

}  // namespace rgbd
