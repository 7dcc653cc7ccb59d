#pragma once

#include "pgwm/model/pipeline.hpp"
#include "pgwm/phantom/dataset.hpp"
#include "pgwm/train/config.hpp"

namespace pgwm {

// Assemble one pre-training sample according to the objective mode.
//   joint: source/target pair with a frame gap, context block on the source,
//          disjoint target blocks on the target, pose = relative change.
//   2d:    target is the source image, pose = 0; target blocks may overlap
//          each other but their patches are removed from the context block.
//   3d:    pair as joint, but every target block sits at the context
//          rectangle's own grid position.
template <class S>
PairSample<S> build_sample(const Dataset &dataset, const std::vector<int> &train_scans,
                           PretrainMode mode, const MaskSpec &mask_spec, const GridSpec &grid,
                           int min_gap, int patch_size, Rng &rng) {
  PGWM_CHECK(!train_scans.empty(), InvalidArgument, "build_sample: no training scans");
  constexpr int kDegenerateRetries = 100;
  for (int attempt = 0;; ++attempt) {
    const int scan = train_scans[rng.uniform_int(0, static_cast<int64_t>(train_scans.size()) - 1)];
    const int frames = dataset.scans()[scan].frames;

    try {
      PairSample<S> item;
      if (mode == PretrainMode::TwoD) {
        const int idx = static_cast<int>(rng.uniform_int(0, frames - 1));
        SliceImage img = dataset.load_frame(scan, idx);
        item.source = patchify<S>(img, patch_size);
        item.target = item.source;
        item.same_image = true;
        item.pose = PoseDelta::zero();

        MaskSpec spec_2d = mask_spec;
        spec_2d.require_disjoint_targets = false;
        spec_2d.remove_target_overlap_from_context = true;
        item.targets = sample_target_masks(grid, spec_2d, rng);
        item.context = sample_context_mask(grid, spec_2d, rng, &item.targets);
        return item;
      }

      auto [si, ti] = sample_pair_indices(frames, min_gap, rng);
      SliceImage src = dataset.load_frame(scan, si);
      SliceImage tgt = dataset.load_frame(scan, ti);
      // may throw DegeneratePose near the Euler singularity; redraw the pair
      item.pose = relative_pose(src.pose, tgt.pose);
      item.source = patchify<S>(src, patch_size);
      item.target = patchify<S>(tgt, patch_size);

      if (mode == PretrainMode::ThreeD) {
        MaskSpec spec_3d = mask_spec;
        spec_3d.remove_target_overlap_from_context = false;
        item.context = sample_context_mask(grid, spec_3d, rng, nullptr);
        // all target blocks at the context block's own position
        BlockMask same = item.context;
        item.targets.assign(static_cast<size_t>(mask_spec.num_targets), same);
      } else {
        MaskSpec spec_joint = mask_spec;
        spec_joint.require_disjoint_targets = true;
        item.targets = sample_target_masks(grid, spec_joint, rng);
        // positional overlap removal from the source context is off by
        // default (the target blocks live on a different image); the flag
        // allows experimenting with it
        const auto *exclude =
            spec_joint.remove_target_overlap_from_context ? &item.targets : nullptr;
        item.context = sample_context_mask(grid, spec_joint, rng, exclude);
      }
      return item;
    } catch (const DegeneratePose &) {
      if (attempt >= kDegenerateRetries) throw;
    }
  }
}

template <class S>
std::vector<PairSample<S>> build_batch(const Dataset &dataset, const std::vector<int> &train_scans,
                                       PretrainMode mode, const MaskSpec &mask_spec,
                                       const GridSpec &grid, int min_gap, int patch_size,
                                       int batch_size, uint64_t seed, int64_t step) {
  std::vector<PairSample<S>> batch;
  batch.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    // per-sample stream: independent of worker layout and batch position
    Rng rng(mix_seed(seed, hash_label("batch"), static_cast<uint64_t>(step),
                     static_cast<uint64_t>(i)));
    batch.push_back(
        build_sample<S>(dataset, train_scans, mode, mask_spec, grid, min_gap, patch_size, rng));
  }
  return batch;
}

} // namespace pgwm
