#pragma once

#include <cstdint>
#include <vector>

#include "pgwm/geometry/pose.hpp"
#include "pgwm/phantom/volume.hpp"

namespace pgwm {

// One 2D plane image sampled from a volume. Pixels in [0, 1], row-major.
struct SliceImage {
  int h = 0;
  int w = 0;
  std::vector<float> pixels;
  Pose pose;
  int scan_id = -1;
  int frame_index = -1;

  float at(int row, int col) const { return pixels[static_cast<size_t>(row) * w + col]; }
  float &at(int row, int col) { return pixels[static_cast<size_t>(row) * w + col]; }
};

struct SliceConfig {
  int out_h = 64;
  int out_w = 64;
  double pixel_spacing = 1.0; // mm per pixel
};

// Sample a planar grid centered at pose.t (offset from the volume center),
// oriented by pose.r. Pixel (row, col) maps to the world point
//   R * (u, v, 0) + t   with u = (col - floor(W/2)) * spacing,
//                            v = (row - floor(H/2)) * spacing.
// Trilinear interpolation; samples outside the volume read 0.
SliceImage slice_plane(const Volume &vol, const Pose &pose, const SliceConfig &cfg);

} // namespace pgwm
