#pragma once

#include <optional>
#include <vector>

#include "pgwm/error.hpp"
#include "pgwm/rng.hpp"

namespace pgwm {

struct GridSpec {
  int rows = 0;
  int cols = 0;
  int patch_size = 0;
  int patch_count() const { return rows * cols; }
  bool operator==(const GridSpec &o) const = default;
};

struct BlockRect {
  int top = 0, left = 0, h = 0, w = 0;
};

// Patch-index selection over a grid. Indices are sorted, unique and in
// [0, rows*cols). Masks sampled as rectangles carry their rect; masks
// derived by set operations (context minus targets) do not.
struct BlockMask {
  std::vector<int> indices;
  GridSpec grid;
  std::optional<BlockRect> rect;

  int size() const { return static_cast<int>(indices.size()); }
  bool contains(int idx) const;
  bool intersects(const BlockMask &other) const;
};

BlockMask rect_mask(const GridSpec &grid, const BlockRect &r);

struct MaskSpec {
  int num_targets = 4;
  double target_scale_min = 0.15, target_scale_max = 0.2;
  double target_aspect_min = 0.75, target_aspect_max = 1.5;
  double context_scale_min = 0.85, context_scale_max = 1.0;
  bool require_disjoint_targets = true;
  bool remove_target_overlap_from_context = false;

  void validate() const;
};

// Sample num_targets rectangular target blocks. Each block covers a patch
// count within round(N * scale range) at an aspect ratio (w/h) within the
// aspect range; blocks are pairwise disjoint when required. Bounded
// rejection; throws InfeasibleMask when the spec cannot be satisfied.
std::vector<BlockMask> sample_target_masks(const GridSpec &grid, const MaskSpec &spec, Rng &rng);

// Sample one rectangular context block at context scale (aspect
// unconstrained). When exclude blocks are given, their patches are removed
// from the context mask (the result may be non-rectangular); throws
// InfeasibleMask when nothing remains.
BlockMask sample_context_mask(const GridSpec &grid, const MaskSpec &spec, Rng &rng,
                              const std::vector<BlockMask> *exclude = nullptr);

} // namespace pgwm
