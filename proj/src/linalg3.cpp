#include "rgbd/linalg3.hpp"

#include <algorithm>
#include <cmath>

namespace rgbd {

namespace {

// Eigenvalues of a symmetric 3x3 by the trigonometric solution of the
// characteristic cubic (no iteration). Returns ascending order.
std::array<double, 3> sym_eigenvalues(const Mat3& a) {
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  if (p1 == 0.0) {
    std::array<double, 3> d = {a(0, 0), a(1, 1), a(2, 2)};
    std::sort(d.begin(), d.end());
    return d;
  }
  const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                    (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  Mat3 b = (a - Mat3::identity() * q) * (1.0 / p);
  double detb = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
  double r = detb / 2.0;
  r = std::clamp(r, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double big = q + 2.0 * p * std::cos(phi);
  const double small = q + 2.0 * p * std::cos(phi + 2.0 * kPi / 3.0);
  const double mid = 3.0 * q - big - small;
  return {small, mid, big};
}

// Eigenvector for eigenvalue lam: the null direction of (A - lam I),
// taken as the largest cross product of its rows. Falls back to a unit
// axis when all rows vanish (A - lam I == 0 numerically).
Vec3 eigenvector_for(const Mat3& a, double lam) {
  Vec3 r0{a(0, 0) - lam, a(0, 1), a(0, 2)};
  Vec3 r1{a(1, 0), a(1, 1) - lam, a(1, 2)};
  Vec3 r2{a(2, 0), a(2, 1), a(2, 2) - lam};
  Vec3 c01 = cross(r0, r1);
  Vec3 c02 = cross(r0, r2);
  Vec3 c12 = cross(r1, r2);
  double n01 = dot(c01, c01), n02 = dot(c02, c02), n12 = dot(c12, c12);
  Vec3 best = c01;
  double bestn = n01;
  if (n02 > bestn) {
    best = c02;
    bestn = n02;
  }
  if (n12 > bestn) {
    best = c12;
    bestn = n12;
  }
  if (bestn <= 0.0) {
    // Rank-deficient beyond recovery here; pick the axis with the
    // smallest diagonal residual so the result is at least deterministic.
    double d0 = std::abs(a(0, 0) - lam), d1 = std::abs(a(1, 1) - lam), d2 = std::abs(a(2, 2) - lam);
    if (d0 <= d1 && d0 <= d2) return {1, 0, 0};
    if (d1 <= d2) return {0, 1, 0};
    return {0, 0, 1};
  }
  return best / std::sqrt(bestn);
}

}  // namespace

SymEigen3 sym_eigen3(const Mat3& a) {
  SymEigen3 out;
  out.values = sym_eigenvalues(a);

  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  if (p1 == 0.0) {
    // Already diagonal: map sorted values back to their axes.
    std::array<std::pair<double, int>, 3> d = {
        std::make_pair(a(0, 0), 0), std::make_pair(a(1, 1), 1), std::make_pair(a(2, 2), 2)};
    std::stable_sort(d.begin(), d.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });
    for (int i = 0; i < 3; ++i) {
      Vec3 v{0, 0, 0};
      if (d[i].second == 0)
        v.x = 1;
      else if (d[i].second == 1)
        v.y = 1;
      else
        v.z = 1;
      out.vectors[i] = v;
    }
  } else {
    for (int i = 0; i < 3; ++i) out.vectors[i] = eigenvector_for(a, out.values[i]);
    // The middle eigenvector is the weakest numerically; rebuild it
    // orthogonal to the other two when they are well separated.
    if (out.values[2] - out.values[0] > 0) {
      Vec3 mid = cross(out.vectors[2], out.vectors[0]);
      double n = norm(mid);
      if (n > 1e-12) out.vectors[1] = mid / n;
    }
  }
  out.smallest_gap = out.values[1] - out.values[0];
  return out;
}

}  // namespace rgbd
