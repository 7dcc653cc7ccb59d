#pragma once

#include <Eigen/Dense>
#include <array>

#include "pgwm/error.hpp"

namespace pgwm {

// Rigid probe pose. Translation in mm, rotation as Euler angles in degrees
// applied in intrinsic Z-Y-X order (R = Rz * Ry * Rx). Angles are kept in
// (-180, 180]. This convention is used everywhere: trajectory state, pose
// extraction, guidance labels and MAE reporting.

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kRadToDeg = 180.0 / kPi;

// |pitch| closer than this to 90 degrees is treated as degenerate for Euler
// extraction.
constexpr double kGimbalMarginDeg = 0.5;

struct Pose {
  Eigen::Vector3d t = Eigen::Vector3d::Zero(); // mm
  Eigen::Vector3d r = Eigen::Vector3d::Zero(); // degrees (rx, ry, rz)

  static Pose identity() { return Pose{}; }
};

// Relative 6-DoF change between two planes: (dx, dy, dz, drx, dry, drz),
// mm and degrees.
struct PoseDelta {
  Eigen::Matrix<double, 6, 1> a = Eigen::Matrix<double, 6, 1>::Zero();

  Eigen::Vector3d translation() const { return a.head<3>(); }
  Eigen::Vector3d rotation_deg() const { return a.tail<3>(); }

  static PoseDelta zero() { return PoseDelta{}; }
};

inline double wrap_angle_deg(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w <= -180.0) w += 360.0;
  if (w > 180.0) w -= 360.0;
  return w;
}

inline bool pose_finite(const Pose &p) {
  return p.t.allFinite() && p.r.allFinite();
}

// R = Rz(rz) * Ry(ry) * Rx(rx), angles in degrees.
inline Eigen::Matrix3d rotation_from_euler_zyx(const Eigen::Vector3d &r_deg) {
  const double rx = r_deg[0] * kDegToRad;
  const double ry = r_deg[1] * kDegToRad;
  const double rz = r_deg[2] * kDegToRad;
  Eigen::Matrix3d R;
  R = Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) *
      Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
      Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX());
  return R;
}

// Inverse of rotation_from_euler_zyx. Throws DegeneratePose when the pitch
// is within kGimbalMarginDeg of +/-90 degrees.
inline Eigen::Vector3d euler_zyx_from_rotation(const Eigen::Matrix3d &R) {
  const double sin_pitch = -R(2, 0);
  const double clamped = std::clamp(sin_pitch, -1.0, 1.0);
  const double pitch = std::asin(clamped);
  const double pitch_deg = pitch * kRadToDeg;
  if (std::abs(std::abs(pitch_deg) - 90.0) < kGimbalMarginDeg)
    throw DegeneratePose("euler extraction degenerate: |pitch| = " +
                         std::to_string(std::abs(pitch_deg)) + " deg");
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  Eigen::Vector3d r_deg(roll * kRadToDeg, pitch_deg, yaw * kRadToDeg);
  for (int i = 0; i < 3; ++i) r_deg[i] = wrap_angle_deg(r_deg[i]);
  return r_deg;
}

inline Eigen::Isometry3d pose_to_transform(const Pose &p) {
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  T.linear() = rotation_from_euler_zyx(p.r);
  T.translation() = p.t;
  return T;
}

inline Pose pose_from_transform(const Eigen::Isometry3d &T) {
  Pose p;
  p.t = T.translation();
  p.r = euler_zyx_from_rotation(T.linear());
  return p;
}

// The rigid change taking src to tgt, extracted from T_tgt * T_src^-1
// (composition in the world frame: apply_delta(src, a) == tgt).
inline PoseDelta relative_pose(const Pose &src, const Pose &tgt) {
  PGWM_CHECK(pose_finite(src) && pose_finite(tgt), InvalidArgument,
             "relative_pose: non-finite pose components");
  Eigen::Isometry3d D = pose_to_transform(tgt) * pose_to_transform(src).inverse();
  PoseDelta d;
  d.a.tail<3>() = euler_zyx_from_rotation(D.linear());
  d.a.head<3>() = D.translation();
  return d;
}

inline Eigen::Isometry3d delta_to_transform(const PoseDelta &d) {
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  T.linear() = rotation_from_euler_zyx(d.rotation_deg());
  T.translation() = d.translation();
  return T;
}

inline PoseDelta delta_from_transform(const Eigen::Isometry3d &T) {
  PoseDelta d;
  d.a.tail<3>() = euler_zyx_from_rotation(T.linear());
  d.a.head<3>() = T.translation();
  return d;
}

// Left-compose the delta onto p: result = T_a * T_p.
inline Pose apply_delta(const Pose &p, const PoseDelta &d) {
  return pose_from_transform(delta_to_transform(d) * pose_to_transform(p));
}

inline PoseDelta invert_delta(const PoseDelta &d) {
  return delta_from_transform(delta_to_transform(d).inverse());
}

} // namespace pgwm
