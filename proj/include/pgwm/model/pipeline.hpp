#pragma once

#include "pgwm/model/world_model.hpp"

namespace pgwm {

// One pre-training sample: a source/target plane pair with masks and the
// rigid change between the two planes.
template <class S>
struct PairSample {
  PatchGrid<S> source;
  PatchGrid<S> target;
  BlockMask context;
  std::vector<BlockMask> targets;
  PoseDelta pose;
  bool same_image = false; // 2d path: target is the source image
};

// Student + EMA-teacher bundle for the joint 2D/3D objective. Parameter
// layout: encoder first (the EMA subset), then pose encoder, predictor and
// query token. The teacher store mirrors the encoder prefix.
template <class S>
struct JepaModel {
  EncoderConfig enc_cfg;
  PredictorConfig pred_cfg;
  bool shared_encoder = false;   // target features from the student itself
  bool normalize_targets = true; // per-token layer norm on teacher outputs

  nn::ParamStore<S> params;  // student
  nn::ParamStore<S> teacher; // EMA copy of the encoder prefix
  int encoder_param_count = 0;

  VitEncoder<S> encoder;
  PoseEncoderNet<S> pose_encoder;
  Predictor<S> predictor;

  static JepaModel create(const EncoderConfig &ec, const PredictorConfig &pc, uint64_t seed,
                          bool shared_encoder = false, bool normalize_targets = true) {
    JepaModel m;
    m.enc_cfg = ec;
    m.pred_cfg = pc;
    m.shared_encoder = shared_encoder;
    m.normalize_targets = normalize_targets;
    Rng rng(mix_seed(seed, hash_label("model-init")));
    m.encoder = VitEncoder<S>::create(m.params, ec, "encoder", rng);
    m.encoder_param_count = m.params.size();
    m.pose_encoder =
        PoseEncoderNet<S>::create(m.params, "pose_encoder", ec.hidden_dim, pc.pose_mlp_depth, rng);
    m.predictor = Predictor<S>::create(m.params, pc, ec.hidden_dim, ec.grid(), "predictor", rng);
    m.reset_teacher();
    return m;
  }

  void reset_teacher() {
    teacher = nn::ParamStore<S>();
    for (int i = 0; i < encoder_param_count; ++i) {
      teacher.add(params.name(i), params.value(i).rows(), params.value(i).cols(),
                  params.entry(i).no_decay);
      teacher.value(i) = params.value(i);
    }
  }

  // Forward pass for one sample; returns the scalar loss node. Teacher
  // targets carry no gradient (separate no-grad leaves, or the student's own
  // values treated as constants when shared_encoder is set). Duplicate
  // target blocks (the 3d path uses M copies of one position) are encoded
  // and predicted once; the loss still sees all M entries, which is exact
  // because identical blocks contribute identical terms.
  nn::Var<S> sample_loss(nn::Tape<S> &tape, const nn::LeafTable<S> &student_leaves,
                         const nn::LeafTable<S> &teacher_leaves, const PairSample<S> &item,
                         nn::Var<S> pose_input = nullptr) const {
    std::vector<BlockMask> unique_masks;
    std::vector<size_t> block_of; // target index -> unique index
    for (const auto &m : item.targets) {
      size_t u = 0;
      for (; u < unique_masks.size(); ++u)
        if (unique_masks[u].indices == m.indices) break;
      if (u == unique_masks.size()) unique_masks.push_back(m);
      block_of.push_back(u);
    }

    auto target_feats = encoder.encode_targets(tape, teacher_leaves, item.target, unique_masks,
                                               normalize_targets);
    auto ctx = encoder.encode_masked(tape, student_leaves, item.source, item.context);
    auto a = pose_input ? pose_input : tape.input(pose_delta_row<S>(item.pose));
    auto pose_token = pose_encoder.forward(tape, student_leaves, a);
    auto unique_preds =
        predictor.predict_targets(tape, student_leaves, ctx, pose_token, unique_masks);

    std::vector<FeatureSet<S>> preds, targets;
    preds.reserve(block_of.size());
    targets.reserve(block_of.size());
    for (size_t u : block_of) {
      preds.push_back(unique_preds[u]);
      targets.push_back(target_feats[u]);
    }
    return jepa_loss(tape, preds, targets);
  }

  // Leaves for the target-feature path: the EMA teacher store, or the
  // student store without gradients when the encoder is shared.
  nn::LeafTable<S> teacher_leaves(nn::Tape<S> &tape) const {
    return shared_encoder ? nn::make_leaves(tape, params, /*requires_grad=*/false)
                          : nn::make_leaves(tape, teacher, /*requires_grad=*/false);
  }
};

} // namespace pgwm
