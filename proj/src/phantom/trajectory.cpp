#include "pgwm/phantom/trajectory.hpp"

#include <cmath>

namespace pgwm {

void TrajectoryConfig::validate() const {
  PGWM_CHECK(frames > 0, InvalidArgument, "trajectory: frames must be positive");
  PGWM_CHECK(max_translation_frac >= 0 && max_translation_frac <= 0.25, InvalidArgument,
             "trajectory: translation bound exceeds 25% of volume extent");
  PGWM_CHECK(max_rotation_deg >= 0 && max_rotation_deg <= 45.0, InvalidArgument,
             "trajectory: rotation bound exceeds 45 deg");
  PGWM_CHECK(max_step_mm >= 0 && max_step_mm <= 1.0, InvalidArgument,
             "trajectory: translation step cap exceeds 1 mm");
  PGWM_CHECK(max_step_deg >= 0 && max_step_deg <= 2.0, InvalidArgument,
             "trajectory: rotation step cap exceeds 2 deg");
  PGWM_CHECK(momentum >= 0 && momentum < 1.0, InvalidArgument,
             "trajectory: momentum must be in [0, 1)");
}

Scan generate_scan(const Volume &vol, const TrajectoryConfig &cfg, uint64_t seed, int scan_id) {
  cfg.validate();

  const double t_bound = cfg.max_translation_frac * vol.extent_mm();
  const double r_bound = cfg.max_rotation_deg;

  Rng rng(mix_seed(vol.seed, seed, hash_label("trajectory")));

  // state: 3 translations (mm), 3 rotations (deg); smooth velocity walk with
  // per-component step caps; hitting a bound clamps and reverses.
  double pos[6], vel[6] = {0, 0, 0, 0, 0, 0};
  for (int i = 0; i < 3; ++i) pos[i] = rng.uniform(-0.6, 0.6) * t_bound;
  for (int i = 3; i < 6; ++i) pos[i] = rng.uniform(-0.6, 0.6) * r_bound;

  Scan scan;
  scan.volume_seed = vol.seed;
  scan.trajectory_seed = seed;
  scan.frames.reserve(cfg.frames);

  for (int f = 0; f < cfg.frames; ++f) {
    Pose pose;
    pose.t = Eigen::Vector3d(pos[0], pos[1], pos[2]);
    pose.r = Eigen::Vector3d(pos[3], pos[4], pos[5]);
    SliceImage img = slice_plane(vol, pose, cfg.slice);
    img.scan_id = scan_id;
    img.frame_index = f;
    scan.frames.push_back(std::move(img));

    for (int i = 0; i < 6; ++i) {
      const double cap = (i < 3) ? cfg.max_step_mm : cfg.max_step_deg;
      const double bound = (i < 3) ? t_bound : r_bound;
      vel[i] = cfg.momentum * vel[i] + (1.0 - cfg.momentum) * rng.normal(0.0, 2.0 * cap);
      double step = std::clamp(vel[i], -cap, cap);
      double next = pos[i] + step;
      // reflection would break the step cap; clamp at the wall instead
      if (next > bound || next < -bound) {
        next = std::clamp(next, -bound, bound);
        vel[i] = -vel[i];
      }
      pos[i] = next;
    }
  }
  return scan;
}

std::pair<int, int> sample_pair_indices(int frame_count, int min_gap, Rng &rng) {
  PGWM_CHECK(min_gap >= 0, InvalidArgument, "sample_pair: min_gap must be >= 0");
  if (frame_count <= min_gap)
    throw InsufficientFrames("sample_pair: scan of " + std::to_string(frame_count) +
                             " frames cannot satisfy min_gap " + std::to_string(min_gap));
  // Rejection keeps the distribution uniform over all admissible ordered
  // pairs. min_gap < frame_count guarantees admissible pairs exist.
  for (;;) {
    int s = static_cast<int>(rng.uniform_int(0, frame_count - 1));
    int t = static_cast<int>(rng.uniform_int(0, frame_count - 1));
    if (s == t) continue;
    if (std::abs(t - s) >= min_gap) return {s, t};
  }
}

std::pair<const SliceImage *, const SliceImage *> sample_pair(const Scan &scan, int min_gap,
                                                              Rng &rng) {
  auto [s, t] = sample_pair_indices(static_cast<int>(scan.frames.size()), min_gap, rng);
  return {&scan.frames[s], &scan.frames[t]};
}

int scaled_min_gap(int frame_count) {
  constexpr double kFullProtocolGap = 150.0;
  constexpr double kFullProtocolScanFrames = 3735.0; // nominal clinical scan length
  int gap = static_cast<int>(std::lround(kFullProtocolGap * frame_count / kFullProtocolScanFrames));
  return std::max(1, gap);
}

} // namespace pgwm
