#include "pgwm/phantom/slicer.hpp"

namespace pgwm {

SliceImage slice_plane(const Volume &vol, const Pose &pose, const SliceConfig &cfg) {
  PGWM_CHECK(pose_finite(pose), InvalidArgument, "slice_plane: non-finite pose components");
  PGWM_CHECK(cfg.out_h > 0 && cfg.out_w > 0 && cfg.pixel_spacing > 0, InvalidArgument,
             "slice_plane: invalid slice config");

  const Eigen::Matrix3d R = rotation_from_euler_zyx(pose.r);
  const Eigen::Vector3d ex = R.col(0); // in-plane x (image columns)
  const Eigen::Vector3d ey = R.col(1); // in-plane y (image rows)

  SliceImage img;
  img.h = cfg.out_h;
  img.w = cfg.out_w;
  img.pose = pose;
  img.pixels.resize(static_cast<size_t>(cfg.out_h) * cfg.out_w);

  const int ch = cfg.out_h / 2;
  const int cw = cfg.out_w / 2;
  for (int row = 0; row < cfg.out_h; ++row) {
    const double v = (row - ch) * cfg.pixel_spacing;
    for (int col = 0; col < cfg.out_w; ++col) {
      const double u = (col - cw) * cfg.pixel_spacing;
      const Eigen::Vector3d p = pose.t + u * ex + v * ey;
      img.at(row, col) = static_cast<float>(vol.sample_world(p[0], p[1], p[2]));
    }
  }
  return img;
}

} // namespace pgwm
