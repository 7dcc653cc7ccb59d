#pragma once

#include <functional>

#include "pgwm/guidance/model.hpp"
#include "pgwm/train/parallel.hpp"

namespace pgwm {

// Fine-tune on an explicit sample set. With from_ckpt set, encoder and
// predictor start from the pre-trained weights; otherwise the whole model
// trains from random init (the baseline).
template <class S>
GuidanceModel<S> finetune_on(const RunConfig &cfg, const Dataset &dataset,
                             const std::vector<GuidanceSample> &samples,
                             const std::filesystem::path *from_ckpt, uint64_t seed,
                             std::vector<double> *loss_trace = nullptr) {
  cfg.guidance.validate();
  cfg.encoder.validate();
  cfg.predictor.validate();
  PGWM_CHECK(!samples.empty(), InvalidArgument, "finetune: empty sample set");

  auto model = GuidanceModel<S>::create(cfg.encoder, cfg.predictor,
                                        static_cast<int>(cfg.guidance.planes.size()), seed);
  if (from_ckpt) model.load_pretrained(*from_ckpt);

  const int n = static_cast<int>(samples.size());
  const int batch = std::min(cfg.guidance.batch_size, n);
  const int steps_per_epoch = std::max(1, n / batch);
  const int64_t total_steps = static_cast<int64_t>(steps_per_epoch) * cfg.guidance.epochs;

  LrSchedule lr{cfg.guidance.lr_start, cfg.guidance.lr_start, cfg.guidance.lr_final, 0,
                total_steps};
  nn::AdamW<S> opt;
  opt.weight_decay = cfg.guidance.weight_decay;

  const int patch = cfg.encoder.patch_size;
  std::vector<int> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.guidance.epochs; ++epoch) {
    // deterministic reshuffle per epoch
    Rng shuffle_rng(mix_seed(seed, hash_label("finetune-shuffle"), static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, static_cast<int64_t>(i) - 1)]);

    for (int s = 0; s < steps_per_epoch; ++s) {
      const int64_t step = static_cast<int64_t>(epoch) * steps_per_epoch + s;
      std::vector<const GuidanceSample *> items;
      items.reserve(batch);
      for (int b = 0; b < batch; ++b) items.push_back(&samples[order[(s * batch + b) % n]]);

      nn::GradTable<S> grads(model.params.size());
      auto losses = parallel_batch_backward<S>(
          model.params, nullptr, batch, cfg.guidance.num_workers, grads,
          [&](nn::Tape<S> &tape, const nn::LeafTable<S> &leaves, const nn::LeafTable<S> &,
              int i) {
            const GuidanceSample &gs = *items[i];
            auto pg = patchify<S>(dataset.load_frame(gs.scan_idx, gs.frame_idx), patch);
            return model.sample_loss(tape, leaves, pg, gs.plane_id, gs.label);
          });
      double mean = 0;
      for (double l : losses) mean += l;
      mean /= losses.size();
      if (!std::isfinite(mean))
        throw Error("non-finite-loss",
                    "fine-tuning aborted: non-finite loss at step " + std::to_string(step));
      if (loss_trace) loss_trace->push_back(mean);
      grads.scale(S(1.0 / batch));
      opt.step(model.params, grads, lr.at(step));
    }
  }
  return model;
}

// Fine-tune on the training split (strided per config).
template <class S>
GuidanceModel<S> finetune(const RunConfig &cfg, const Dataset &dataset,
                          const std::filesystem::path *from_ckpt, uint64_t seed,
                          std::vector<double> *loss_trace = nullptr) {
  auto train_set =
      build_guidance_samples(dataset, "train", cfg.guidance.planes, cfg.guidance.train_stride);
  return finetune_on<S>(cfg, dataset, train_set.samples, from_ckpt, seed, loss_trace);
}

// Pluggable predictor for evaluation harness self-tests.
using GuidancePredictFn = std::function<std::array<double, 6>(const GuidanceSample &)>;

// Evaluate per-plane, per-axis MAE in native units over a sample set.
MaeReport evaluate_mae_with(const std::vector<GuidanceSample> &samples,
                            const std::vector<StandardPlane> &planes,
                            const GuidancePredictFn &predict);

template <class S>
MaeReport evaluate_mae(const GuidanceModel<S> &model, const Dataset &dataset,
                       const std::vector<GuidanceSample> &samples,
                       const std::vector<StandardPlane> &planes, int num_workers) {
  PGWM_CHECK(!samples.empty(), InvalidArgument, "evaluate_mae: empty test set");
  const int n = static_cast<int>(samples.size());
  std::vector<std::array<double, 6>> preds(n);
  const int patch = model.enc_cfg.patch_size;
  parallel_batch_eval<S>(model.params, n, num_workers,
                         [&](nn::Tape<S> &tape, const nn::LeafTable<S> &leaves, int i) {
                           const GuidanceSample &gs = samples[i];
                           auto pg = patchify<S>(
                               dataset.load_frame(gs.scan_idx, gs.frame_idx), patch);
                           preds[i] = model.predict(tape, leaves, pg, gs.plane_id);
                         });
  MaeReport report =
      evaluate_mae_with(samples, planes, [&](const GuidanceSample &gs) {
        // index back via pointer arithmetic: samples are evaluated in order
        const size_t idx = static_cast<size_t>(&gs - samples.data());
        return preds[idx];
      });
  report.mode_tag = model.mode_tag;
  return report;
}

} // namespace pgwm
