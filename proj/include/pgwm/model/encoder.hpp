#pragma once

#include "pgwm/masking/masks.hpp"
#include "pgwm/nn/layers.hpp"
#include "pgwm/nn/positional.hpp"
#include "pgwm/phantom/slicer.hpp"

namespace pgwm {

struct EncoderConfig {
  int depth = 3;
  int hidden_dim = 32;
  int num_heads = 4;
  int patch_size = 8;
  int image_size = 64;
  double mlp_ratio = 4.0;

  void validate() const {
    PGWM_CHECK(depth > 0 && hidden_dim > 0 && num_heads > 0, InvalidArgument,
               "encoder config: dims must be positive");
    PGWM_CHECK(hidden_dim % num_heads == 0, InvalidArgument,
               "encoder config: heads must divide hidden_dim");
    PGWM_CHECK(image_size % patch_size == 0, InvalidArgument,
               "encoder config: image size must be divisible by patch size");
  }
  GridSpec grid() const {
    return GridSpec{image_size / patch_size, image_size / patch_size, patch_size};
  }
  int patch_count() const { return grid().patch_count(); }
  int patch_dim() const { return patch_size * patch_size; }
};

// N x (p*p) matrix of flattened patches in row-major patch order.
template <class S>
struct PatchGrid {
  nn::Mat<S> patches;
  GridSpec grid;
};

// Token features with their grid provenance.
template <class S>
struct FeatureSet {
  nn::Var<S> tokens;              // L x C
  std::vector<int> patch_indices; // which grid position each token came from
};

template <class S>
PatchGrid<S> patchify(const SliceImage &img, int patch_size) {
  PGWM_CHECK(img.h % patch_size == 0 && img.w % patch_size == 0, InvalidArgument,
             "patchify: image dims must be divisible by patch size");
  const int rows = img.h / patch_size;
  const int cols = img.w / patch_size;
  PatchGrid<S> pg;
  pg.grid = GridSpec{rows, cols, patch_size};
  pg.patches.resize(rows * cols, patch_size * patch_size);
  for (int pr = 0; pr < rows; ++pr)
    for (int pc = 0; pc < cols; ++pc) {
      const int n = pr * cols + pc;
      for (int i = 0; i < patch_size; ++i)
        for (int j = 0; j < patch_size; ++j)
          pg.patches(n, i * patch_size + j) =
              static_cast<S>(img.at(pr * patch_size + i, pc * patch_size + j));
    }
  return pg;
}

template <class S>
SliceImage unpatchify(const PatchGrid<S> &pg) {
  const int p = pg.grid.patch_size;
  SliceImage img;
  img.h = pg.grid.rows * p;
  img.w = pg.grid.cols * p;
  img.pixels.assign(static_cast<size_t>(img.h) * img.w, 0.0f);
  for (int pr = 0; pr < pg.grid.rows; ++pr)
    for (int pc = 0; pc < pg.grid.cols; ++pc) {
      const int n = pr * pg.grid.cols + pc;
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
          img.at(pr * p + i, pc * p + j) = static_cast<float>(pg.patches(n, i * p + j));
    }
  return img;
}

// ViT over flattened patches: linear patch embedding + fixed sine-cosine
// positions + pre-norm transformer stack with a final norm.
template <class S>
struct VitEncoder {
  EncoderConfig cfg;
  nn::LinearLayer<S> patch_embed;
  nn::TransformerStack<S> stack;
  nn::Mat<S> pos; // N x C, fixed

  static VitEncoder create(nn::ParamStore<S> &store, const EncoderConfig &cfg,
                           const std::string &prefix, Rng &rng) {
    cfg.validate();
    VitEncoder e;
    e.cfg = cfg;
    e.patch_embed =
        nn::LinearLayer<S>::create(store, prefix + ".patch_embed", cfg.patch_dim(),
                                   cfg.hidden_dim, rng);
    e.stack = nn::TransformerStack<S>::create(store, prefix, cfg.hidden_dim, cfg.depth,
                                              cfg.num_heads, cfg.mlp_ratio, rng);
    const GridSpec g = cfg.grid();
    e.pos = nn::sincos_position_embedding<S>(g.rows, g.cols, cfg.hidden_dim);
    return e;
  }

  // Context path: masked-out patches are dropped before the transformer, so
  // only selected tokens attend to each other.
  FeatureSet<S> encode_masked(nn::Tape<S> &t, const nn::LeafTable<S> &p, const PatchGrid<S> &pg,
                              const BlockMask &mask) const {
    PGWM_CHECK(!mask.indices.empty(), InvalidArgument, "encode_masked: empty mask");
    PGWM_CHECK(mask.grid == cfg.grid(), InvalidArgument, "encode_masked: grid mismatch");
    nn::Mat<S> selected(static_cast<Eigen::Index>(mask.indices.size()), pg.patches.cols());
    nn::Mat<S> pos_sel(static_cast<Eigen::Index>(mask.indices.size()), cfg.hidden_dim);
    for (size_t k = 0; k < mask.indices.size(); ++k) {
      selected.row(k) = pg.patches.row(mask.indices[k]);
      pos_sel.row(k) = pos.row(mask.indices[k]);
    }
    auto x = t.input(std::move(selected));
    auto emb = patch_embed.forward(t, p, x);
    emb = nn::add(t, emb, t.input(std::move(pos_sel)));
    FeatureSet<S> out;
    out.tokens = stack.forward(t, p, emb);
    out.patch_indices = mask.indices;
    return out;
  }

  // Full-image path: all N tokens attend to each other.
  FeatureSet<S> encode_full(nn::Tape<S> &t, const nn::LeafTable<S> &p,
                            const PatchGrid<S> &pg) const {
    auto x = t.input(nn::Mat<S>(pg.patches));
    auto emb = patch_embed.forward(t, p, x);
    emb = nn::add(t, emb, t.input(nn::Mat<S>(pos)));
    FeatureSet<S> out;
    out.tokens = stack.forward(t, p, emb);
    out.patch_indices.resize(pg.grid.patch_count());
    for (int i = 0; i < pg.grid.patch_count(); ++i) out.patch_indices[i] = i;
    return out;
  }

  // Target path: encode the full image once, then gather the tokens under
  // each block; optionally layer-normalize the gathered targets per token.
  std::vector<FeatureSet<S>> encode_targets(nn::Tape<S> &t, const nn::LeafTable<S> &p,
                                            const PatchGrid<S> &pg,
                                            const std::vector<BlockMask> &masks,
                                            bool normalize_targets = true) const {
    PGWM_CHECK(!masks.empty(), InvalidArgument, "encode_targets: empty mask list");
    auto full = encode_full(t, p, pg);
    std::vector<FeatureSet<S>> out;
    out.reserve(masks.size());
    for (const auto &m : masks) {
      PGWM_CHECK(!m.indices.empty(), InvalidArgument, "encode_targets: empty mask");
      PGWM_CHECK(m.grid == cfg.grid(), InvalidArgument, "encode_targets: grid mismatch");
      FeatureSet<S> f;
      f.tokens = nn::gather_rows(t, full.tokens, m.indices);
      if (normalize_targets) f.tokens = nn::layer_norm<S>(t, f.tokens, nullptr, nullptr);
      f.patch_indices = m.indices;
      out.push_back(std::move(f));
    }
    return out;
  }
};

} // namespace pgwm
