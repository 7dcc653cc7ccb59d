#pragma once

#include <json.hpp>
#include <string>

#include "pgwm/masking/masks.hpp"
#include "pgwm/model/world_model.hpp"
#include "pgwm/phantom/dataset.hpp"

namespace pgwm {

enum class PretrainMode { Joint, TwoD, ThreeD };

std::string to_string(PretrainMode m);
PretrainMode pretrain_mode_from_string(const std::string &s);

// Dataset generation settings.
struct DataConfig {
  uint64_t volume_seed = 7;
  int volume_size = 64;
  double voxel_spacing = 1.0;
  int image_h = 64;
  int image_w = 64;
  double pixel_spacing = 0.45; // mm per pixel; field of view < volume extent
  int train_scans = 8;
  int test_scans = 3;
  int frames_per_scan = 512;
  bool lossless = false;
  TrajectoryConfig trajectory; // slice part is filled from the fields above

  TrajectoryConfig full_trajectory() const {
    TrajectoryConfig t = trajectory;
    t.frames = frames_per_scan;
    t.slice = SliceConfig{image_h, image_w, pixel_spacing};
    return t;
  }
};

struct PretrainConfig {
  PretrainMode mode = PretrainMode::Joint;
  int epochs = 20;
  int batch_size = 64;
  int warmup_epochs = 3;
  double lr_start = 1e-4;
  double lr_peak = 5e-4;
  double lr_final = 5e-7;
  double ema_start = 0.996;
  double ema_end = 1.0;
  double weight_decay = 0.05;
  int min_gap = -1; // -1: scale the 150-frame rule by scan length
  int num_workers = 2;
  int checkpoint_every_epochs = 0; // 0: final checkpoint only
  bool shared_encoder = false;
  bool normalize_targets = true;
  uint64_t seed = 1;

  void validate() const {
    PGWM_CHECK(epochs > 0 && batch_size > 0, InvalidArgument, "pretrain: bad epochs/batch");
    PGWM_CHECK(warmup_epochs >= 0 && warmup_epochs < epochs, InvalidArgument,
               "pretrain: warmup_epochs must be < epochs");
    PGWM_CHECK(lr_start > 0 && lr_peak > 0 && lr_final > 0, InvalidArgument,
               "pretrain: learning rates must be positive");
    PGWM_CHECK(num_workers >= 1, InvalidArgument, "pretrain: need at least one worker");
  }
};

// A named canonical pose inside the phantom (a synthetic standard view).
struct StandardPlane {
  std::string name;
  Pose pose;
};

// Four synthetic standard views spread through the phantom interior,
// rotations modest so labels stay far from Euler degeneracy.
inline std::vector<StandardPlane> default_standard_planes() {
  std::vector<StandardPlane> p(4);
  p[0].name = "plane_a";
  p[0].pose.t = Eigen::Vector3d(0.0, 0.0, 0.0);
  p[0].pose.r = Eigen::Vector3d(0.0, 0.0, 0.0);
  p[1].name = "plane_b";
  p[1].pose.t = Eigen::Vector3d(6.0, -4.0, 5.0);
  p[1].pose.r = Eigen::Vector3d(18.0, 0.0, -12.0);
  p[2].name = "plane_c";
  p[2].pose.t = Eigen::Vector3d(-5.0, 6.0, -6.0);
  p[2].pose.r = Eigen::Vector3d(-15.0, 12.0, 0.0);
  p[3].name = "plane_d";
  p[3].pose.t = Eigen::Vector3d(4.0, 5.0, -8.0);
  p[3].pose.r = Eigen::Vector3d(0.0, -16.0, 14.0);
  return p;
}

struct GuidanceConfig {
  std::vector<StandardPlane> planes = default_standard_planes();
  int epochs = 3;
  int batch_size = 64;
  double lr_start = 1e-4;
  double lr_final = 1e-6;
  double weight_decay = 0.05;
  int train_stride = 4; // subsample training frames
  int eval_stride = 2;
  int num_workers = 2;
  uint64_t seed = 1;

  void validate() const;
};


struct RunConfig {
  DataConfig data;
  MaskSpec masks;
  EncoderConfig encoder;
  PredictorConfig predictor;
  PretrainConfig pretrain;
  GuidanceConfig guidance;
  std::string out_root = "runs";

  int resolved_min_gap(int scan_frames) const;
};

nlohmann::json to_json(const RunConfig &cfg);
RunConfig run_config_from_json(const nlohmann::json &j);
RunConfig load_run_config(const std::string &path);
void save_run_config(const RunConfig &cfg, const std::string &path);

// FNV-1a over the canonical (sorted-key) JSON dump.
std::string config_hash(const RunConfig &cfg);

} // namespace pgwm
