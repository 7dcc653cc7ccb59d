#pragma once

#include <utility>
#include <vector>

#include "pgwm/phantom/slicer.hpp"
#include "pgwm/rng.hpp"

namespace pgwm {

// Random-walk scan configuration. Bounds are validated against the hard
// limits that keep poses identifiable and Euler extraction non-degenerate:
// translations within +/-25% of the volume extent, rotations within +/-45
// deg per axis, per-frame steps within 1 mm / 2 deg.
struct TrajectoryConfig {
  int frames = 512;
  double max_translation_frac = 0.25; // of volume extent, per axis
  double max_rotation_deg = 45.0;     // per axis
  double max_step_mm = 1.0;           // per frame, per axis
  double max_step_deg = 2.0;          // per frame, per axis
  double momentum = 0.9;              // walk smoothness
  SliceConfig slice;

  void validate() const;
};

struct Scan {
  std::vector<SliceImage> frames;
  uint64_t volume_seed = 0;
  uint64_t trajectory_seed = 0;
};

// Deterministic per (vol.seed, cfg, seed). Frame poses follow a smooth
// bounded random walk; each frame is slice_plane at the walked pose.
Scan generate_scan(const Volume &vol, const TrajectoryConfig &cfg, uint64_t seed,
                   int scan_id = 0);

// Uniformly sample an ordered (source, target) frame-index pair with
// |t - s| >= min_gap. Throws InsufficientFrames when frame_count <= min_gap.
std::pair<int, int> sample_pair_indices(int frame_count, int min_gap, Rng &rng);

// Same-scan image pair with sufficient pose variation between the frames.
std::pair<const SliceImage *, const SliceImage *> sample_pair(const Scan &scan, int min_gap,
                                                              Rng &rng);

// Desk-scale analogue of the full-protocol 150-frame separation rule: the
// gap shrinks proportionally with scan length relative to a nominal
// clinical scan of ~3735 frames.
int scaled_min_gap(int frame_count);

} // namespace pgwm
