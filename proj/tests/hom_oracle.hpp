#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "pgwm/geometry/pose.hpp"

namespace pgwm::testutil {

// Independent oracle: 4x4 homogeneous transforms built from first
// principles (explicit rotation matrices, no Eigen geometry module).
struct Hom44 {
  double m[4][4];

  static Hom44 identity() {
    Hom44 h{};
    for (int i = 0; i < 4; ++i) h.m[i][i] = 1.0;
    return h;
  }

  static Hom44 from_pose(const Eigen::Vector3d &t, const Eigen::Vector3d &r_deg) {
    const double rx = r_deg[0] * kDegToRad, ry = r_deg[1] * kDegToRad, rz = r_deg[2] * kDegToRad;
    const double cx = std::cos(rx), sx = std::sin(rx);
    const double cy = std::cos(ry), sy = std::sin(ry);
    const double cz = std::cos(rz), sz = std::sin(rz);
    // R = Rz * Ry * Rx, expanded by hand
    Hom44 h = identity();
    h.m[0][0] = cz * cy;
    h.m[0][1] = cz * sy * sx - sz * cx;
    h.m[0][2] = cz * sy * cx + sz * sx;
    h.m[1][0] = sz * cy;
    h.m[1][1] = sz * sy * sx + cz * cx;
    h.m[1][2] = sz * sy * cx - cz * sx;
    h.m[2][0] = -sy;
    h.m[2][1] = cy * sx;
    h.m[2][2] = cy * cx;
    h.m[0][3] = t[0];
    h.m[1][3] = t[1];
    h.m[2][3] = t[2];
    return h;
  }

  Hom44 mul(const Hom44 &o) const {
    Hom44 r{};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) r.m[i][j] += m[i][k] * o.m[k][j];
    return r;
  }

  // rigid inverse: R^T, -R^T t
  Hom44 inv() const {
    Hom44 r = identity();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    for (int i = 0; i < 3; ++i) {
      r.m[i][3] = 0;
      for (int j = 0; j < 3; ++j) r.m[i][3] -= m[j][i] * m[j][3];
    }
    return r;
  }

  // ZYX Euler extraction, degrees
  void decompose(Eigen::Vector3d &t, Eigen::Vector3d &r_deg) const {
    const double pitch = std::asin(std::clamp(-m[2][0], -1.0, 1.0));
    const double roll = std::atan2(m[2][1], m[2][2]);
    const double yaw = std::atan2(m[1][0], m[0][0]);
    r_deg = Eigen::Vector3d(roll, pitch, yaw) * kRadToDeg;
    t = Eigen::Vector3d(m[0][3], m[1][3], m[2][3]);
  }
};


} // namespace pgwm::testutil
