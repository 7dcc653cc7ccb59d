#pragma once

#include "pgwm/phantom/dataset.hpp"
#include "pgwm/train/config.hpp"

namespace pgwm {

// One probe-guidance example: an image plus the 6-DoF adjustment from the
// image's pose to a named standard plane.
struct GuidanceSample {
  int scan_idx = 0;   // index into dataset.scans()
  int frame_idx = 0;
  int plane_id = 0;
  PoseDelta label;    // relative_pose(frame pose, plane pose)
};

struct GuidanceSampleSet {
  std::vector<GuidanceSample> samples;
  int skipped_degenerate = 0; // frames whose Euler extraction was singular
};

// Build (frame, plane) samples for every stride-th frame of the split's
// scans. Degenerate frame/plane combinations are skipped deterministically.
GuidanceSampleSet build_guidance_samples(const Dataset &dataset, const std::string &split,
                                         const std::vector<StandardPlane> &planes, int stride);

// Per-axis label statistics over a sample set (native units).
struct LabelStats {
  std::array<double, 6> mean_abs{};
  std::array<double, 6> stddev{};
};
LabelStats label_stats(const std::vector<GuidanceSample> &samples);

} // namespace pgwm
