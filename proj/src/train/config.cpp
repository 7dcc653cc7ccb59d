#include "pgwm/train/config.hpp"

#include <fstream>

namespace pgwm {

using nlohmann::json;

std::string to_string(PretrainMode m) {
  switch (m) {
    case PretrainMode::Joint: return "joint";
    case PretrainMode::TwoD: return "2d";
    case PretrainMode::ThreeD: return "3d";
  }
  return "joint";
}

PretrainMode pretrain_mode_from_string(const std::string &s) {
  if (s == "joint") return PretrainMode::Joint;
  if (s == "2d") return PretrainMode::TwoD;
  if (s == "3d") return PretrainMode::ThreeD;
  throw InvalidArgument("unknown pretrain mode: " + s + " (expected joint | 2d | 3d)");
}

void GuidanceConfig::validate() const {
  PGWM_CHECK(planes.size() >= 1, InvalidArgument, "guidance: need at least one standard plane");
  PGWM_CHECK(epochs > 0 && batch_size > 0, InvalidArgument, "guidance: bad epochs/batch");
  PGWM_CHECK(train_stride >= 1 && eval_stride >= 1, InvalidArgument, "guidance: bad stride");
  // Planes must be distinguishable: >= 5 mm or >= 10 deg apart on some axis.
  for (size_t i = 0; i < planes.size(); ++i)
    for (size_t j = i + 1; j < planes.size(); ++j) {
      const auto &a = planes[i].pose;
      const auto &b = planes[j].pose;
      bool ok = false;
      for (int k = 0; k < 3; ++k) ok = ok || std::abs(a.t[k] - b.t[k]) >= 5.0;
      for (int k = 0; k < 3; ++k) ok = ok || std::abs(a.r[k] - b.r[k]) >= 10.0;
      PGWM_CHECK(ok, InvalidArgument,
                 "guidance: planes '" + planes[i].name + "' and '" + planes[j].name +
                     "' are closer than the 5 mm / 10 deg floor");
    }
}

namespace {

json trajectory_to_json(const TrajectoryConfig &t) {
  return json{{"max_translation_frac", t.max_translation_frac},
              {"max_rotation_deg", t.max_rotation_deg},
              {"max_step_mm", t.max_step_mm},
              {"max_step_deg", t.max_step_deg},
              {"momentum", t.momentum}};
}

void trajectory_from_json(const json &j, TrajectoryConfig &t) {
  t.max_translation_frac = j.value("max_translation_frac", t.max_translation_frac);
  t.max_rotation_deg = j.value("max_rotation_deg", t.max_rotation_deg);
  t.max_step_mm = j.value("max_step_mm", t.max_step_mm);
  t.max_step_deg = j.value("max_step_deg", t.max_step_deg);
  t.momentum = j.value("momentum", t.momentum);
}

} // namespace

json to_json(const RunConfig &cfg) {
  json j;
  j["data"] = {{"volume_seed", cfg.data.volume_seed},
               {"volume_size", cfg.data.volume_size},
               {"voxel_spacing", cfg.data.voxel_spacing},
               {"image_h", cfg.data.image_h},
               {"image_w", cfg.data.image_w},
               {"pixel_spacing", cfg.data.pixel_spacing},
               {"train_scans", cfg.data.train_scans},
               {"test_scans", cfg.data.test_scans},
               {"frames_per_scan", cfg.data.frames_per_scan},
               {"lossless", cfg.data.lossless},
               {"trajectory", trajectory_to_json(cfg.data.trajectory)}};
  j["masks"] = {{"num_targets", cfg.masks.num_targets},
                {"target_scale", {cfg.masks.target_scale_min, cfg.masks.target_scale_max}},
                {"target_aspect", {cfg.masks.target_aspect_min, cfg.masks.target_aspect_max}},
                {"context_scale", {cfg.masks.context_scale_min, cfg.masks.context_scale_max}},
                {"require_disjoint_targets", cfg.masks.require_disjoint_targets},
                {"remove_target_overlap_from_context",
                 cfg.masks.remove_target_overlap_from_context}};
  j["encoder"] = {{"depth", cfg.encoder.depth},
                  {"hidden_dim", cfg.encoder.hidden_dim},
                  {"num_heads", cfg.encoder.num_heads},
                  {"patch_size", cfg.encoder.patch_size},
                  {"image_size", cfg.encoder.image_size},
                  {"mlp_ratio", cfg.encoder.mlp_ratio}};
  j["predictor"] = {{"depth", cfg.predictor.depth},
                    {"hidden_dim", cfg.predictor.hidden_dim},
                    {"num_heads", cfg.predictor.num_heads},
                    {"mlp_ratio", cfg.predictor.mlp_ratio},
                    {"pose_mlp_depth", cfg.predictor.pose_mlp_depth}};
  j["pretrain"] = {{"mode", to_string(cfg.pretrain.mode)},
                   {"epochs", cfg.pretrain.epochs},
                   {"batch_size", cfg.pretrain.batch_size},
                   {"warmup_epochs", cfg.pretrain.warmup_epochs},
                   {"lr_start", cfg.pretrain.lr_start},
                   {"lr_peak", cfg.pretrain.lr_peak},
                   {"lr_final", cfg.pretrain.lr_final},
                   {"ema_start", cfg.pretrain.ema_start},
                   {"ema_end", cfg.pretrain.ema_end},
                   {"weight_decay", cfg.pretrain.weight_decay},
                   {"min_gap", cfg.pretrain.min_gap},
                   {"num_workers", cfg.pretrain.num_workers},
                   {"checkpoint_every_epochs", cfg.pretrain.checkpoint_every_epochs},
                   {"shared_encoder", cfg.pretrain.shared_encoder},
                   {"normalize_targets", cfg.pretrain.normalize_targets},
                   {"seed", cfg.pretrain.seed}};
  json planes = json::array();
  for (const auto &p : cfg.guidance.planes)
    planes.push_back(json{{"name", p.name},
                          {"t", {p.pose.t[0], p.pose.t[1], p.pose.t[2]}},
                          {"r", {p.pose.r[0], p.pose.r[1], p.pose.r[2]}}});
  j["guidance"] = {{"planes", planes},
                   {"epochs", cfg.guidance.epochs},
                   {"batch_size", cfg.guidance.batch_size},
                   {"lr_start", cfg.guidance.lr_start},
                   {"lr_final", cfg.guidance.lr_final},
                   {"weight_decay", cfg.guidance.weight_decay},
                   {"train_stride", cfg.guidance.train_stride},
                   {"eval_stride", cfg.guidance.eval_stride},
                   {"num_workers", cfg.guidance.num_workers},
                   {"seed", cfg.guidance.seed}};
  j["out_root"] = cfg.out_root;
  return j;
}

RunConfig run_config_from_json(const json &j) {
  RunConfig cfg;
  if (j.contains("data")) {
    const auto &d = j["data"];
    cfg.data.volume_seed = d.value("volume_seed", cfg.data.volume_seed);
    cfg.data.volume_size = d.value("volume_size", cfg.data.volume_size);
    cfg.data.voxel_spacing = d.value("voxel_spacing", cfg.data.voxel_spacing);
    cfg.data.image_h = d.value("image_h", cfg.data.image_h);
    cfg.data.image_w = d.value("image_w", cfg.data.image_w);
    cfg.data.pixel_spacing = d.value("pixel_spacing", cfg.data.pixel_spacing);
    cfg.data.train_scans = d.value("train_scans", cfg.data.train_scans);
    cfg.data.test_scans = d.value("test_scans", cfg.data.test_scans);
    cfg.data.frames_per_scan = d.value("frames_per_scan", cfg.data.frames_per_scan);
    cfg.data.lossless = d.value("lossless", cfg.data.lossless);
    if (d.contains("trajectory")) trajectory_from_json(d["trajectory"], cfg.data.trajectory);
  }
  if (j.contains("masks")) {
    const auto &m = j["masks"];
    cfg.masks.num_targets = m.value("num_targets", cfg.masks.num_targets);
    if (m.contains("target_scale")) {
      cfg.masks.target_scale_min = m["target_scale"][0].get<double>();
      cfg.masks.target_scale_max = m["target_scale"][1].get<double>();
    }
    if (m.contains("target_aspect")) {
      cfg.masks.target_aspect_min = m["target_aspect"][0].get<double>();
      cfg.masks.target_aspect_max = m["target_aspect"][1].get<double>();
    }
    if (m.contains("context_scale")) {
      cfg.masks.context_scale_min = m["context_scale"][0].get<double>();
      cfg.masks.context_scale_max = m["context_scale"][1].get<double>();
    }
    cfg.masks.require_disjoint_targets =
        m.value("require_disjoint_targets", cfg.masks.require_disjoint_targets);
    cfg.masks.remove_target_overlap_from_context =
        m.value("remove_target_overlap_from_context", cfg.masks.remove_target_overlap_from_context);
  }
  if (j.contains("encoder")) {
    const auto &e = j["encoder"];
    cfg.encoder.depth = e.value("depth", cfg.encoder.depth);
    cfg.encoder.hidden_dim = e.value("hidden_dim", cfg.encoder.hidden_dim);
    cfg.encoder.num_heads = e.value("num_heads", cfg.encoder.num_heads);
    cfg.encoder.patch_size = e.value("patch_size", cfg.encoder.patch_size);
    cfg.encoder.image_size = e.value("image_size", cfg.encoder.image_size);
    cfg.encoder.mlp_ratio = e.value("mlp_ratio", cfg.encoder.mlp_ratio);
  }
  if (j.contains("predictor")) {
    const auto &p = j["predictor"];
    cfg.predictor.depth = p.value("depth", cfg.predictor.depth);
    cfg.predictor.hidden_dim = p.value("hidden_dim", cfg.predictor.hidden_dim);
    cfg.predictor.num_heads = p.value("num_heads", cfg.predictor.num_heads);
    cfg.predictor.mlp_ratio = p.value("mlp_ratio", cfg.predictor.mlp_ratio);
    cfg.predictor.pose_mlp_depth = p.value("pose_mlp_depth", cfg.predictor.pose_mlp_depth);
  }
  if (j.contains("pretrain")) {
    const auto &p = j["pretrain"];
    if (p.contains("mode")) cfg.pretrain.mode = pretrain_mode_from_string(p["mode"].get<std::string>());
    cfg.pretrain.epochs = p.value("epochs", cfg.pretrain.epochs);
    cfg.pretrain.batch_size = p.value("batch_size", cfg.pretrain.batch_size);
    cfg.pretrain.warmup_epochs = p.value("warmup_epochs", cfg.pretrain.warmup_epochs);
    cfg.pretrain.lr_start = p.value("lr_start", cfg.pretrain.lr_start);
    cfg.pretrain.lr_peak = p.value("lr_peak", cfg.pretrain.lr_peak);
    cfg.pretrain.lr_final = p.value("lr_final", cfg.pretrain.lr_final);
    cfg.pretrain.ema_start = p.value("ema_start", cfg.pretrain.ema_start);
    cfg.pretrain.ema_end = p.value("ema_end", cfg.pretrain.ema_end);
    cfg.pretrain.weight_decay = p.value("weight_decay", cfg.pretrain.weight_decay);
    cfg.pretrain.min_gap = p.value("min_gap", cfg.pretrain.min_gap);
    cfg.pretrain.num_workers = p.value("num_workers", cfg.pretrain.num_workers);
    cfg.pretrain.checkpoint_every_epochs =
        p.value("checkpoint_every_epochs", cfg.pretrain.checkpoint_every_epochs);
    cfg.pretrain.shared_encoder = p.value("shared_encoder", cfg.pretrain.shared_encoder);
    cfg.pretrain.normalize_targets = p.value("normalize_targets", cfg.pretrain.normalize_targets);
    cfg.pretrain.seed = p.value("seed", cfg.pretrain.seed);
  }
  cfg.guidance.planes = default_standard_planes();
  if (j.contains("guidance")) {
    const auto &g = j["guidance"];
    if (g.contains("planes")) {
      cfg.guidance.planes.clear();
      for (const auto &pj : g["planes"]) {
        StandardPlane p;
        p.name = pj.at("name").get<std::string>();
        for (int i = 0; i < 3; ++i) p.pose.t[i] = pj.at("t")[i].get<double>();
        for (int i = 0; i < 3; ++i) p.pose.r[i] = pj.at("r")[i].get<double>();
        cfg.guidance.planes.push_back(std::move(p));
      }
    }
    cfg.guidance.epochs = g.value("epochs", cfg.guidance.epochs);
    cfg.guidance.batch_size = g.value("batch_size", cfg.guidance.batch_size);
    cfg.guidance.lr_start = g.value("lr_start", cfg.guidance.lr_start);
    cfg.guidance.lr_final = g.value("lr_final", cfg.guidance.lr_final);
    cfg.guidance.weight_decay = g.value("weight_decay", cfg.guidance.weight_decay);
    cfg.guidance.train_stride = g.value("train_stride", cfg.guidance.train_stride);
    cfg.guidance.eval_stride = g.value("eval_stride", cfg.guidance.eval_stride);
    cfg.guidance.num_workers = g.value("num_workers", cfg.guidance.num_workers);
    cfg.guidance.seed = g.value("seed", cfg.guidance.seed);
  }
  cfg.out_root = j.value("out_root", cfg.out_root);
  return cfg;
}

RunConfig load_run_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception &e) {
    throw FormatError("cannot parse config " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig &cfg, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << to_json(cfg).dump(2) << "\n";
}

int RunConfig::resolved_min_gap(int scan_frames) const {
  if (pretrain.min_gap >= 0) return pretrain.min_gap;
  return scaled_min_gap(scan_frames);
}

std::string config_hash(const RunConfig &cfg) {
  const std::string dump = to_json(cfg).dump();
  uint64_t h = 0xCBF29CE484222325ull;
  for (char c : dump) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace pgwm
