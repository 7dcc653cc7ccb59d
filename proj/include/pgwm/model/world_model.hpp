#pragma once

#include "pgwm/geometry/pose.hpp"
#include "pgwm/model/encoder.hpp"

namespace pgwm {

struct PredictorConfig {
  int depth = 2;
  int hidden_dim = 32;
  int num_heads = 4;
  double mlp_ratio = 4.0;
  int pose_mlp_depth = 2;

  void validate() const {
    PGWM_CHECK(depth > 0 && hidden_dim > 0 && num_heads > 0 && pose_mlp_depth > 0,
               InvalidArgument, "predictor config: dims must be positive");
    PGWM_CHECK(hidden_dim % num_heads == 0, InvalidArgument,
               "predictor config: heads must divide hidden_dim");
  }
};

// Per-dimension normalization so all six pose channels are O(1):
// translations divided by 25 mm, rotations by 45 deg.
constexpr double kPoseScaleMm = 25.0;
constexpr double kPoseScaleDeg = 45.0;

template <class S>
nn::Mat<S> pose_delta_row(const PoseDelta &d) {
  nn::Mat<S> a(1, 6);
  for (int i = 0; i < 6; ++i) a(0, i) = static_cast<S>(d.a[i]);
  return a;
}

template <class S>
nn::Mat<S> pose_inverse_scales() {
  nn::Mat<S> s(1, 6);
  for (int i = 0; i < 3; ++i) s(0, i) = static_cast<S>(1.0 / kPoseScaleMm);
  for (int i = 3; i < 6; ++i) s(0, i) = static_cast<S>(1.0 / kPoseScaleDeg);
  return s;
}

// Maps the 6-DoF pose change to a single conditioning token (1 x C).
template <class S>
struct PoseEncoderNet {
  std::vector<nn::LinearLayer<S>> layers;
  nn::Mat<S> inv_scales;

  static PoseEncoderNet create(nn::ParamStore<S> &store, const std::string &prefix, int out_dim,
                               int depth, Rng &rng) {
    PGWM_CHECK(depth >= 1, InvalidArgument, "pose encoder depth must be >= 1");
    PoseEncoderNet p;
    p.inv_scales = pose_inverse_scales<S>();
    for (int i = 0; i < depth; ++i) {
      const int in = i == 0 ? 6 : out_dim;
      p.layers.push_back(
          nn::LinearLayer<S>::create(store, prefix + ".fc" + std::to_string(i), in, out_dim, rng));
    }
    return p;
  }

  // a: 1x6 raw (mm, deg) node; differentiable w.r.t. a and the parameters.
  nn::Var<S> forward(nn::Tape<S> &t, const nn::LeafTable<S> &p, nn::Var<S> a) const {
    PGWM_CHECK(a->val().rows() == 1 && a->val().cols() == 6, InvalidArgument,
               "pose encoder: expected a 1x6 pose vector");
    PGWM_CHECK(a->val().allFinite(), InvalidArgument, "pose encoder: non-finite pose vector");
    auto x = nn::mul_rowvec_const(t, a, inv_scales);
    for (size_t i = 0; i < layers.size(); ++i) {
      x = layers[i].forward(t, p, x);
      if (i + 1 < layers.size()) x = nn::gelu(t, x);
    }
    return x;
  }
};

// Feature predictor: a narrow transformer over the concatenated sequence
// [context tokens + positions, pose token, queries + target positions].
// Each target block runs in its own forward pass (no cross-block attention).
template <class S>
struct Predictor {
  PredictorConfig cfg;
  int encoder_dim = 0;
  nn::LinearLayer<S> in_proj;  // C -> D
  nn::TransformerStack<S> stack;
  nn::LinearLayer<S> out_proj; // D -> C
  int query_token = -1;        // shared learnable 1 x C token
  nn::Mat<S> pos;              // canonical-grid positions, N x C

  static Predictor create(nn::ParamStore<S> &store, const PredictorConfig &cfg, int encoder_dim,
                          const GridSpec &grid, const std::string &prefix, Rng &rng) {
    cfg.validate();
    Predictor w;
    w.cfg = cfg;
    w.encoder_dim = encoder_dim;
    w.in_proj = nn::LinearLayer<S>::create(store, prefix + ".in_proj", encoder_dim,
                                           cfg.hidden_dim, rng);
    w.stack = nn::TransformerStack<S>::create(store, prefix, cfg.hidden_dim, cfg.depth,
                                              cfg.num_heads, cfg.mlp_ratio, rng);
    w.out_proj = nn::LinearLayer<S>::create(store, prefix + ".out_proj", cfg.hidden_dim,
                                            encoder_dim, rng);
    w.query_token = store.add(prefix + ".query_token", 1, encoder_dim, /*no_decay=*/true);
    nn::init_trunc_normal(store.value(w.query_token), rng);
    w.pos = nn::sincos_position_embedding<S>(grid.rows, grid.cols, encoder_dim);
    return w;
  }

  nn::Var<S> positions_for(nn::Tape<S> &t, const std::vector<int> &indices) const {
    nn::Mat<S> q(static_cast<Eigen::Index>(indices.size()), pos.cols());
    for (size_t k = 0; k < indices.size(); ++k) q.row(k) = pos.row(indices[k]);
    return t.input(std::move(q));
  }

  // Predict features for one target block.
  FeatureSet<S> predict_block(nn::Tape<S> &t, const nn::LeafTable<S> &p,
                              const FeatureSet<S> &ctx, nn::Var<S> pose_token,
                              const BlockMask &target) const {
    PGWM_CHECK(ctx.tokens && ctx.tokens->val().rows() > 0, InvalidArgument,
               "predict_block: empty context");
    PGWM_CHECK(ctx.tokens->val().cols() == encoder_dim, InvalidArgument,
               "predict_block: context dim mismatch");
    PGWM_CHECK(pose_token->val().rows() == 1 && pose_token->val().cols() == encoder_dim,
               InvalidArgument, "predict_block: pose token dim mismatch");
    PGWM_CHECK(!target.indices.empty(), InvalidArgument, "predict_block: empty target mask");

    const Eigen::Index lt = static_cast<Eigen::Index>(target.indices.size());
    auto ctx_in = nn::add(t, ctx.tokens, positions_for(t, ctx.patch_indices));
    auto queries = nn::add(t, nn::repeat_row(t, p[query_token], lt),
                           positions_for(t, target.indices));
    auto seq = nn::concat_rows<S>(t, {ctx_in, pose_token, queries});
    auto h = stack.forward(t, p, in_proj.forward(t, p, seq));
    auto tail = nn::slice_rows(t, h, h->val().rows() - lt, lt);
    FeatureSet<S> out;
    out.tokens = out_proj.forward(t, p, tail);
    out.patch_indices = target.indices;
    return out;
  }

  std::vector<FeatureSet<S>> predict_targets(nn::Tape<S> &t, const nn::LeafTable<S> &p,
                                             const FeatureSet<S> &ctx, nn::Var<S> pose_token,
                                             const std::vector<BlockMask> &targets) const {
    PGWM_CHECK(!targets.empty(), InvalidArgument, "predict_targets: no target masks");
    std::vector<FeatureSet<S>> out;
    out.reserve(targets.size());
    for (const auto &m : targets) out.push_back(predict_block(t, p, ctx, pose_token, m));
    return out;
  }
};

// Prediction loss: (1/M) * sum over blocks of the per-token smooth-L1
// averaged over channels and summed over the block's tokens.
template <class S>
nn::Var<S> jepa_loss(nn::Tape<S> &t, const std::vector<FeatureSet<S>> &preds,
                     const std::vector<FeatureSet<S>> &targets) {
  PGWM_CHECK(!preds.empty() && preds.size() == targets.size(), InvalidArgument,
             "jepa_loss: need matching non-empty pred/target lists");
  std::vector<nn::Var<S>> block_terms;
  Eigen::Index channels = -1;
  for (size_t i = 0; i < preds.size(); ++i) {
    const auto &pv = preds[i].tokens->val();
    const auto &tv = targets[i].tokens->val();
    PGWM_CHECK(pv.rows() == tv.rows() && pv.cols() == tv.cols(), InvalidArgument,
               "jepa_loss: shape mismatch at block " + std::to_string(i));
    if (channels < 0) channels = pv.cols();
    auto diff = nn::sub(t, preds[i].tokens, targets[i].tokens);
    block_terms.push_back(nn::sum_all(t, nn::smooth_l1(t, diff)));
  }
  auto total = block_terms.size() == 1 ? block_terms[0] : nn::add_scalars(t, block_terms);
  const S norm = S(1) / (static_cast<S>(preds.size()) * static_cast<S>(channels));
  return nn::scale(t, total, norm);
}

} // namespace pgwm
