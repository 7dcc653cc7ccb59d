#include "pgwm/masking/masks.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace pgwm {

bool BlockMask::contains(int idx) const {
  return std::binary_search(indices.begin(), indices.end(), idx);
}

bool BlockMask::intersects(const BlockMask &other) const {
  auto a = indices.begin();
  auto b = other.indices.begin();
  while (a != indices.end() && b != other.indices.end()) {
    if (*a == *b) return true;
    if (*a < *b)
      ++a;
    else
      ++b;
  }
  return false;
}

BlockMask rect_mask(const GridSpec &grid, const BlockRect &r) {
  PGWM_CHECK(r.top >= 0 && r.left >= 0 && r.h > 0 && r.w > 0 && r.top + r.h <= grid.rows &&
                 r.left + r.w <= grid.cols,
             InvalidArgument, "rect_mask: rectangle out of grid bounds");
  BlockMask m;
  m.grid = grid;
  m.rect = r;
  m.indices.reserve(static_cast<size_t>(r.h) * r.w);
  for (int i = 0; i < r.h; ++i)
    for (int j = 0; j < r.w; ++j) m.indices.push_back((r.top + i) * grid.cols + (r.left + j));
  std::sort(m.indices.begin(), m.indices.end());
  return m;
}

void MaskSpec::validate() const {
  PGWM_CHECK(num_targets >= 1, InvalidArgument, "mask spec: num_targets must be >= 1");
  auto check_range = [](double lo, double hi, const char *what) {
    PGWM_CHECK(lo > 0 && hi <= 1.0 && lo <= hi, InvalidArgument,
               std::string("mask spec: bad ") + what + " scale range");
  };
  check_range(target_scale_min, target_scale_max, "target");
  check_range(context_scale_min, context_scale_max, "context");
  PGWM_CHECK(target_aspect_min > 0 && target_aspect_min <= target_aspect_max, InvalidArgument,
             "mask spec: bad aspect range");
}

namespace {

struct Shape {
  int h, w;
};

// All rectangle shapes whose patch count lies in [n_min, n_max], fit in the
// grid, and (when constrain_aspect) whose w/h ratio lies in the inclusive
// aspect range.
std::vector<Shape> valid_shapes(const GridSpec &grid, int n_min, int n_max, double ar_min,
                                double ar_max, bool constrain_aspect) {
  std::vector<Shape> shapes;
  for (int h = 1; h <= grid.rows; ++h) {
    for (int w = 1; w <= grid.cols; ++w) {
      const int n = h * w;
      if (n < n_min || n > n_max) continue;
      if (constrain_aspect) {
        const double ar = static_cast<double>(w) / h;
        const double eps = 1e-12;
        if (ar < ar_min - eps || ar > ar_max + eps) continue;
      }
      shapes.push_back({h, w});
    }
  }
  return shapes;
}

BlockRect sample_rect(const GridSpec &grid, const std::vector<Shape> &shapes, Rng &rng) {
  const Shape s = shapes[static_cast<size_t>(rng.uniform_int(0, shapes.size() - 1))];
  BlockRect r;
  r.h = s.h;
  r.w = s.w;
  r.top = static_cast<int>(rng.uniform_int(0, grid.rows - s.h));
  r.left = static_cast<int>(rng.uniform_int(0, grid.cols - s.w));
  return r;
}

int scaled_count(int n, double scale) { return static_cast<int>(std::lround(n * scale)); }

} // namespace

std::vector<BlockMask> sample_target_masks(const GridSpec &grid, const MaskSpec &spec, Rng &rng) {
  spec.validate();
  const int n = grid.patch_count();
  const int n_min = std::max(1, scaled_count(n, spec.target_scale_min));
  const int n_max = std::max(n_min, scaled_count(n, spec.target_scale_max));

  if (spec.require_disjoint_targets && spec.num_targets * n_min > n)
    throw InfeasibleMask("target masks infeasible: " + std::to_string(spec.num_targets) +
                         " disjoint blocks of >= " + std::to_string(n_min) + " patches exceed " +
                         std::to_string(n) + " grid patches");

  const auto shapes = valid_shapes(grid, n_min, n_max, spec.target_aspect_min,
                                   spec.target_aspect_max, /*constrain_aspect=*/true);
  if (shapes.empty())
    throw InfeasibleMask("target masks infeasible: no rectangle shape matches scale [" +
                         std::to_string(n_min) + ", " + std::to_string(n_max) +
                         "] with the aspect range on a " + std::to_string(grid.rows) + "x" +
                         std::to_string(grid.cols) + " grid");

  // Blocks are placed sequentially; each placement gets a bounded number of
  // draws to avoid the ones already placed, and a dead-ended layout restarts
  // from scratch.
  constexpr int kSetAttempts = 100;
  constexpr int kBlockAttempts = 100;
  for (int attempt = 0; attempt < kSetAttempts; ++attempt) {
    std::vector<BlockMask> masks;
    bool ok = true;
    for (int b = 0; b < spec.num_targets && ok; ++b) {
      bool placed = false;
      for (int k = 0; k < kBlockAttempts; ++k) {
        BlockMask cand = rect_mask(grid, sample_rect(grid, shapes, rng));
        if (spec.require_disjoint_targets) {
          bool clash = false;
          for (const auto &m : masks)
            if (cand.intersects(m)) {
              clash = true;
              break;
            }
          if (clash) continue;
        }
        masks.push_back(std::move(cand));
        placed = true;
        break;
      }
      ok = placed;
    }
    if (ok) return masks;
  }
  throw InfeasibleMask("target masks infeasible after bounded rejection; shrink num_targets or "
                       "the scale range");
}

BlockMask sample_context_mask(const GridSpec &grid, const MaskSpec &spec, Rng &rng,
                              const std::vector<BlockMask> *exclude) {
  spec.validate();
  const int n = grid.patch_count();
  const int n_min = std::max(1, scaled_count(n, spec.context_scale_min));
  const int n_max = std::max(n_min, scaled_count(n, spec.context_scale_max));

  const auto shapes = valid_shapes(grid, n_min, n_max, 0, 0, /*constrain_aspect=*/false);
  if (shapes.empty())
    throw InfeasibleMask("context mask infeasible: no rectangle shape matches scale [" +
                         std::to_string(n_min) + ", " + std::to_string(n_max) + "] on a " +
                         std::to_string(grid.rows) + "x" + std::to_string(grid.cols) + " grid");

  BlockMask mask = rect_mask(grid, sample_rect(grid, shapes, rng));
  if (exclude && !exclude->empty()) {
    std::unordered_set<int> removed;
    for (const auto &m : *exclude) removed.insert(m.indices.begin(), m.indices.end());
    std::vector<int> kept;
    kept.reserve(mask.indices.size());
    for (int idx : mask.indices)
      if (!removed.count(idx)) kept.push_back(idx);
    if (kept.empty())
      throw InfeasibleMask("context mask empty after removing target overlap");
    mask.indices = std::move(kept);
    mask.rect.reset();
  }
  return mask;
}

} // namespace pgwm
