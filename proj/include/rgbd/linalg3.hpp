#pragma once

#include <array>
#include <cmath>

#include "rgbd/common.hpp"

namespace rgbd {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) { return a / norm(a); }

// Angle between unit vectors, in degrees; the dot product is clamped so
// rounding can never push acos out of domain.
inline double angle_deg(const Vec3& a, const Vec3& b) {
  double c = dot(a, b);
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return rad2deg(std::acos(c));
}

// Row-major symmetric-friendly 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{};

  double& operator()(int r, int c) { return m[r * 3 + c]; }
  double operator()(int r, int c) const { return m[r * 3 + c]; }

  static Mat3 identity() {
    Mat3 a;
    a(0, 0) = a(1, 1) = a(2, 2) = 1.0;
    return a;
  }

  Mat3 operator+(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
    return r;
  }
  Mat3 operator-(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] - o.m[i];
    return r;
  }
  Mat3 operator*(double s) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
    return r;
  }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }
};

inline Mat3 outer(const Vec3& a, const Vec3& b) {
  Mat3 r;
  r(0, 0) = a.x * b.x;
  r(0, 1) = a.x * b.y;
  r(0, 2) = a.x * b.z;
  r(1, 0) = a.y * b.x;
  r(1, 1) = a.y * b.y;
  r(1, 2) = a.y * b.z;
  r(2, 0) = a.z * b.x;
  r(2, 1) = a.z * b.y;
  r(2, 2) = a.z * b.z;
  return r;
}

inline Mat3 rot_x(double rad) {
  Mat3 r = Mat3::identity();
  double c = std::cos(rad), s = std::sin(rad);
  r(1, 1) = c;
  r(1, 2) = -s;
  r(2, 1) = s;
  r(2, 2) = c;
  return r;
}

inline Mat3 rot_y(double rad) {
  Mat3 r = Mat3::identity();
  double c = std::cos(rad), s = std::sin(rad);
  r(0, 0) = c;
  r(0, 2) = s;
  r(2, 0) = -s;
  r(2, 2) = c;
  return r;
}

inline Mat3 rot_z(double rad) {
  Mat3 r = Mat3::identity();
  double c = std::cos(rad), s = std::sin(rad);
  r(0, 0) = c;
  r(0, 1) = -s;
  r(1, 0) = s;
  r(1, 1) = c;
  return r;
}

// Eigen decomposition of a symmetric 3x3, closed form.
// Eigenvalues ascend; eigenvectors are unit length. `smallest_gap` is
// eigenvalues[1] - eigenvalues[0]; callers use it to detect a degenerate
// smallest eigenspace.
struct SymEigen3 {
  std::array<double, 3> values{};
  std::array<Vec3, 3> vectors{};
  double smallest_gap = 0;
};

SymEigen3 sym_eigen3(const Mat3& a);

}  // namespace rgbd
