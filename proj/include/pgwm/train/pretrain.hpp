#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>

#include "pgwm/model/checkpoint.hpp"
#include "pgwm/nn/optim.hpp"
#include "pgwm/train/batch.hpp"
#include "pgwm/train/parallel.hpp"
#include "pgwm/train/schedule.hpp"

namespace pgwm {

struct TrainMetricsRow {
  int64_t step = 0;
  int epoch = 0;
  double loss = 0;
  double lr = 0;
  double ema_momentum = 0;
  double wall_time_s = 0;
};

struct CheckpointInfo {
  int format_version = kCheckpointFormatVersion;
  std::string mode = "joint";
  int64_t step = 0;
  std::string config_hash;
  EncoderConfig encoder;
  PredictorConfig predictor;
  bool shared_encoder = false;
  bool normalize_targets = true;
};

inline void write_checkpoint_manifest(const std::filesystem::path &dir, const CheckpointInfo &info) {
  nlohmann::json j;
  j["format_version"] = info.format_version;
  j["mode"] = info.mode;
  j["step"] = info.step;
  j["config_hash"] = info.config_hash;
  j["encoder"] = {{"depth", info.encoder.depth},       {"hidden_dim", info.encoder.hidden_dim},
                  {"num_heads", info.encoder.num_heads}, {"patch_size", info.encoder.patch_size},
                  {"image_size", info.encoder.image_size}, {"mlp_ratio", info.encoder.mlp_ratio}};
  j["predictor"] = {{"depth", info.predictor.depth},
                    {"hidden_dim", info.predictor.hidden_dim},
                    {"num_heads", info.predictor.num_heads},
                    {"mlp_ratio", info.predictor.mlp_ratio},
                    {"pose_mlp_depth", info.predictor.pose_mlp_depth}};
  j["shared_encoder"] = info.shared_encoder;
  j["normalize_targets"] = info.normalize_targets;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write checkpoint manifest in " + dir.string());
  out << j.dump(2) << "\n";
}

inline CheckpointInfo read_checkpoint_manifest(const std::filesystem::path &dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("missing checkpoint manifest: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception &e) {
    throw FormatError("corrupt checkpoint manifest " + path.string() + ": " + e.what());
  }
  CheckpointInfo info;
  info.format_version = j.value("format_version", 1);
  info.mode = j.value("mode", "joint");
  info.step = j.value("step", int64_t{0});
  info.config_hash = j.value("config_hash", "");
  if (j.contains("encoder")) {
    const auto &e = j["encoder"];
    info.encoder.depth = e.value("depth", info.encoder.depth);
    info.encoder.hidden_dim = e.value("hidden_dim", info.encoder.hidden_dim);
    info.encoder.num_heads = e.value("num_heads", info.encoder.num_heads);
    info.encoder.patch_size = e.value("patch_size", info.encoder.patch_size);
    info.encoder.image_size = e.value("image_size", info.encoder.image_size);
    info.encoder.mlp_ratio = e.value("mlp_ratio", info.encoder.mlp_ratio);
  }
  if (j.contains("predictor")) {
    const auto &p = j["predictor"];
    info.predictor.depth = p.value("depth", info.predictor.depth);
    info.predictor.hidden_dim = p.value("hidden_dim", info.predictor.hidden_dim);
    info.predictor.num_heads = p.value("num_heads", info.predictor.num_heads);
    info.predictor.mlp_ratio = p.value("mlp_ratio", info.predictor.mlp_ratio);
    info.predictor.pose_mlp_depth = p.value("pose_mlp_depth", info.predictor.pose_mlp_depth);
  }
  info.shared_encoder = j.value("shared_encoder", false);
  info.normalize_targets = j.value("normalize_targets", true);
  return info;
}

template <class S>
void save_jepa_checkpoint(const std::filesystem::path &dir, const JepaModel<S> &model,
                          const CheckpointInfo &info, bool include_moments) {
  std::filesystem::create_directories(dir);
  write_checkpoint_manifest(dir, info);
  save_param_sections<S>(dir / "params.bin",
                         {{"student", &model.params}, {"teacher", &model.teacher}},
                         include_moments);
}

// Orchestrates the self-supervised run: pair sampling, the mode-specific
// objective, AdamW with the warmup+cosine schedule, EMA teacher updates,
// metrics streaming and periodic checkpoints.
template <class S>
class PretrainRunner {
public:
  PretrainRunner(const RunConfig &cfg, const Dataset &dataset)
      : cfg_(cfg), dataset_(&dataset) {
    cfg_.pretrain.validate();
    cfg_.encoder.validate();
    cfg_.predictor.validate();
    PGWM_CHECK(cfg_.encoder.image_size == dataset.meta().image_h &&
                   cfg_.encoder.image_size == dataset.meta().image_w,
               InvalidArgument, "encoder image_size must match the dataset images");
    train_scans_ = dataset.scan_indices_for_split("train");
    PGWM_CHECK(!train_scans_.empty(), InvalidArgument, "dataset has no training scans");

    int train_frames = 0;
    int min_scan_frames = INT32_MAX;
    for (int s : train_scans_) {
      train_frames += dataset.scans()[s].frames;
      min_scan_frames = std::min(min_scan_frames, dataset.scans()[s].frames);
    }
    min_gap_ = cfg_.resolved_min_gap(min_scan_frames);
    if (cfg_.pretrain.mode != PretrainMode::TwoD)
      PGWM_CHECK(min_scan_frames > min_gap_, InsufficientFrames,
                 "scans too short for min_gap " + std::to_string(min_gap_));

    steps_per_epoch_ = std::max(1, train_frames / cfg_.pretrain.batch_size);
    total_steps_ = static_cast<int64_t>(steps_per_epoch_) * cfg_.pretrain.epochs;
    lr_ = LrSchedule{cfg_.pretrain.lr_start, cfg_.pretrain.lr_peak, cfg_.pretrain.lr_final,
                     static_cast<int64_t>(steps_per_epoch_) * cfg_.pretrain.warmup_epochs,
                     total_steps_};
    ema_ = EmaSchedule{cfg_.pretrain.ema_start, cfg_.pretrain.ema_end, total_steps_};
    model_ = JepaModel<S>::create(cfg_.encoder, cfg_.predictor, cfg_.pretrain.seed,
                                  cfg_.pretrain.shared_encoder, cfg_.pretrain.normalize_targets);
    opt_.weight_decay = cfg_.pretrain.weight_decay;
  }

  JepaModel<S> &model() { return model_; }
  const LrSchedule &lr_schedule() const { return lr_; }
  const EmaSchedule &ema_schedule() const { return ema_; }
  int steps_per_epoch() const { return steps_per_epoch_; }
  int64_t total_steps() const { return total_steps_; }
  int min_gap() const { return min_gap_; }
  const std::vector<double> &pose_grad_norms() const { return pose_grad_norms_; }

  std::vector<PairSample<S>> make_batch(int64_t step) const {
    return build_batch<S>(*dataset_, train_scans_, cfg_.pretrain.mode, cfg_.masks,
                          cfg_.encoder.grid(), min_gap_, cfg_.encoder.patch_size,
                          cfg_.pretrain.batch_size, cfg_.pretrain.seed, step);
  }

  TrainMetricsRow train_step(const std::vector<PairSample<S>> &batch, int64_t step) {
    const double lr = lr_.at(step);
    nn::GradTable<S> grads(model_.params.size());
    const nn::ParamStore<S> *teacher =
        model_.shared_encoder ? &model_.params : &model_.teacher;
    auto losses = parallel_batch_backward<S>(
        model_.params, teacher, static_cast<int>(batch.size()), cfg_.pretrain.num_workers, grads,
        [&](nn::Tape<S> &tape, const nn::LeafTable<S> &student, const nn::LeafTable<S> &teacher_l,
            int i) { return model_.sample_loss(tape, student, teacher_l, batch[i]); });

    double mean_loss = 0;
    for (double l : losses) mean_loss += l;
    mean_loss /= static_cast<double>(losses.size());
    if (!std::isfinite(mean_loss))
      throw Error("non-finite-loss", "training aborted: non-finite loss at step " +
                                         std::to_string(step) + " (seed " +
                                         std::to_string(cfg_.pretrain.seed) + ")");

    grads.scale(S(1.0 / static_cast<double>(batch.size())));
    pose_grad_norms_.push_back(pose_first_layer_grad_norm(grads));
    opt_.step(model_.params, grads, lr);

    const double m = ema_.at(step);
    if (!model_.shared_encoder)
      nn::ema_update(model_.params, model_.teacher, m, model_.encoder_param_count);

    TrainMetricsRow row;
    row.step = step;
    row.epoch = static_cast<int>(step / steps_per_epoch_);
    row.loss = mean_loss;
    row.lr = lr;
    row.ema_momentum = m;
    return row;
  }

  // Full run; writes metrics.csv, checkpoints and run_summary.json under
  // out_dir and returns the final checkpoint path. With resume_from set,
  // training continues after the checkpoint's step.
  std::filesystem::path run(const std::filesystem::path &out_dir,
                            const std::filesystem::path *resume_from = nullptr) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    save_run_config(cfg_, (out_dir / "config.json").string());

    int64_t first_step = 0;
    if (resume_from) {
      const CheckpointInfo info = read_checkpoint_manifest(*resume_from);
      PGWM_CHECK(info.mode == to_string(cfg_.pretrain.mode), MismatchError,
                 "resume: checkpoint mode " + info.mode + " differs from config");
      load_param_sections<S>(*resume_from / "params.bin",
                             {{"student", &model_.params}, {"teacher", &model_.teacher}});
      first_step = info.step + 1;
      opt_.set_steps_taken(info.step + 1);
    }

    // In single-worker (deterministic) mode the timing column is pinned to
    // zero so the metrics stream is byte-reproducible; real timing goes to
    // run_summary.json.
    const bool deterministic = cfg_.pretrain.num_workers == 1;
    std::ofstream metrics(out_dir / "metrics.csv");
    if (!metrics) throw IoError("cannot write metrics.csv in " + out_dir.string());
    metrics << "step,epoch,loss,lr,ema_momentum,wall_time_s\n";

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> epoch_mean_losses;
    double epoch_sum = 0;
    int epoch_count = 0;
    fs::path last_ckpt;

    for (int64_t step = first_step; step < total_steps_; ++step) {
      auto batch = make_batch(step);
      TrainMetricsRow row = train_step(batch, step);
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      row.wall_time_s = deterministic ? 0.0 : elapsed;
      write_metrics_row(metrics, row);

      epoch_sum += row.loss;
      ++epoch_count;
      const bool epoch_end = (step + 1) % steps_per_epoch_ == 0 || step + 1 == total_steps_;
      if (epoch_end) {
        epoch_mean_losses.push_back(epoch_sum / epoch_count);
        epoch_sum = 0;
        epoch_count = 0;
        metrics.flush();
        const int epoch = row.epoch;
        if (cfg_.pretrain.checkpoint_every_epochs > 0 &&
            (epoch + 1) % cfg_.pretrain.checkpoint_every_epochs == 0 &&
            step + 1 < total_steps_) {
          last_ckpt = out_dir / ("ckpt_" + std::to_string(step));
          save_checkpoint(last_ckpt, step);
        }
      }
    }

    const fs::path final_ckpt = out_dir / ("ckpt_" + std::to_string(total_steps_ - 1));
    save_checkpoint(final_ckpt, total_steps_ - 1);

    nlohmann::json summary;
    summary["mode"] = to_string(cfg_.pretrain.mode);
    summary["config_hash"] = config_hash(cfg_);
    summary["total_steps"] = total_steps_;
    summary["steps_per_epoch"] = steps_per_epoch_;
    summary["epoch_mean_losses"] = epoch_mean_losses;
    summary["final_checkpoint"] = final_ckpt.string();
    summary["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    summary["pose_grad_norm_mean"] = mean_of(pose_grad_norms_);
    summary["pose_grad_norm_variance"] = variance_of(pose_grad_norms_);
    std::ofstream sum_out(out_dir / "run_summary.json");
    sum_out << summary.dump(2) << "\n";
    return final_ckpt;
  }

  void save_checkpoint(const std::filesystem::path &dir, int64_t step) const {
    CheckpointInfo info;
    info.mode = to_string(cfg_.pretrain.mode);
    info.step = step;
    info.config_hash = config_hash(cfg_);
    info.encoder = cfg_.encoder;
    info.predictor = cfg_.predictor;
    info.shared_encoder = cfg_.pretrain.shared_encoder;
    info.normalize_targets = cfg_.pretrain.normalize_targets;
    save_jepa_checkpoint(dir, model_, info, /*include_moments=*/true);
  }

  static void write_metrics_row(std::ostream &os, const TrainMetricsRow &row) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%lld,%d,%.9g,%.17g,%.9g,%.3f\n",
                  static_cast<long long>(row.step), row.epoch, row.loss, row.lr,
                  row.ema_momentum, row.wall_time_s);
    os << buf;
  }

private:
  double pose_first_layer_grad_norm(const nn::GradTable<S> &grads) const {
    const int idx = model_.pose_encoder.layers.front().w;
    if (grads.grads[idx].size() == 0) return 0.0;
    return static_cast<double>(grads.grads[idx].norm());
  }
  static double mean_of(const std::vector<double> &v) {
    if (v.empty()) return 0;
    double s = 0;
    for (double x : v) s += x;
    return s / v.size();
  }
  static double variance_of(const std::vector<double> &v) {
    if (v.empty()) return 0;
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / v.size();
  }

  RunConfig cfg_;
  const Dataset *dataset_;
  JepaModel<S> model_;
  nn::AdamW<S> opt_;
  LrSchedule lr_;
  EmaSchedule ema_;
  std::vector<int> train_scans_;
  int steps_per_epoch_ = 1;
  int64_t total_steps_ = 1;
  int min_gap_ = 1;
  std::vector<double> pose_grad_norms_;
};

// Sanity harness: repeat steps on one fixed batch at a constant peak
// learning rate; returns the per-step losses.
template <class S>
std::vector<double> overfit_fixed_batch(const RunConfig &cfg, const Dataset &dataset, int steps) {
  RunConfig local = cfg;
  local.pretrain.epochs = std::max(local.pretrain.epochs, 1);
  PretrainRunner<S> runner(local, dataset);
  auto batch = runner.make_batch(0);
  std::vector<double> losses;
  losses.reserve(steps);

  nn::AdamW<S> opt;
  opt.weight_decay = cfg.pretrain.weight_decay;
  auto &model = runner.model();
  for (int k = 0; k < steps; ++k) {
    nn::GradTable<S> grads(model.params.size());
    const nn::ParamStore<S> *teacher = model.shared_encoder ? &model.params : &model.teacher;
    auto per_item = parallel_batch_backward<S>(
        model.params, teacher, static_cast<int>(batch.size()), cfg.pretrain.num_workers, grads,
        [&](nn::Tape<S> &tape, const nn::LeafTable<S> &student, const nn::LeafTable<S> &teacher_l,
            int i) { return model.sample_loss(tape, student, teacher_l, batch[i]); });
    double mean = 0;
    for (double l : per_item) mean += l;
    mean /= per_item.size();
    losses.push_back(mean);
    grads.scale(S(1.0 / batch.size()));
    opt.step(model.params, grads, cfg.pretrain.lr_peak);
    if (!model.shared_encoder)
      nn::ema_update(model.params, model.teacher, runner.ema_schedule().at(std::min<int64_t>(k, runner.total_steps())),
                     model.encoder_param_count);
  }
  return losses;
}

} // namespace pgwm
