#pragma once

#include "pgwm/guidance/report.hpp"
#include "pgwm/guidance/samples.hpp"
#include "pgwm/model/checkpoint.hpp"
#include "pgwm/model/pipeline.hpp"
#include "pgwm/train/pretrain.hpp"

namespace pgwm {

// Probe-guidance regressor built on the pre-trained trunk: the full image is
// encoded by the context encoder, the predictor runs with the pose token
// replaced by a learnable per-plane query (no target queries), and a linear
// head maps the pooled output to the 6 normalized pose adjustments.
template <class S>
struct GuidanceModel {
  EncoderConfig enc_cfg;
  PredictorConfig pred_cfg;
  nn::ParamStore<S> params;
  VitEncoder<S> encoder;
  Predictor<S> predictor;
  std::vector<int> plane_tokens; // one learnable 1 x C query per plane
  nn::LinearLayer<S> head;       // predictor dim -> 6
  std::string mode_tag = "scratch"; // provenance: pretrain mode or "scratch"

  static GuidanceModel create(const EncoderConfig &ec, const PredictorConfig &pc, int num_planes,
                              uint64_t seed) {
    PGWM_CHECK(num_planes >= 1, InvalidArgument, "guidance model: need at least one plane");
    GuidanceModel m;
    m.enc_cfg = ec;
    m.pred_cfg = pc;
    Rng rng(mix_seed(seed, hash_label("guidance-init")));
    m.encoder = VitEncoder<S>::create(m.params, ec, "encoder", rng);
    m.predictor = Predictor<S>::create(m.params, pc, ec.hidden_dim, ec.grid(), "predictor", rng);
    for (int k = 0; k < num_planes; ++k) {
      const int idx = m.params.add("guidance.plane_token" + std::to_string(k), 1, ec.hidden_dim,
                                   /*no_decay=*/true);
      nn::init_trunc_normal(m.params.value(idx), rng);
      m.plane_tokens.push_back(idx);
    }
    m.head = nn::LinearLayer<S>::create(m.params, "guidance.head", pc.hidden_dim, 6, rng);
    return m;
  }

  // Initialize encoder + predictor from a pre-training checkpoint. The pose
  // encoder in the file has no counterpart here and is skipped; dimension
  // conflicts raise MismatchError.
  void load_pretrained(const std::filesystem::path &ckpt_dir) {
    const CheckpointInfo info = read_checkpoint_manifest(ckpt_dir);
    PGWM_CHECK(info.encoder.hidden_dim == enc_cfg.hidden_dim &&
                   info.encoder.patch_size == enc_cfg.patch_size &&
                   info.encoder.image_size == enc_cfg.image_size &&
                   info.encoder.depth == enc_cfg.depth,
               MismatchError, "checkpoint encoder config incompatible with guidance model");
    PGWM_CHECK(info.predictor.hidden_dim == pred_cfg.hidden_dim &&
                   info.predictor.depth == pred_cfg.depth,
               MismatchError, "checkpoint predictor config incompatible with guidance model");
    const int applied = load_params_by_name<S>(ckpt_dir / "params.bin", "student", params);
    PGWM_CHECK(applied > 0, MismatchError,
               "no matching tensors in checkpoint " + ckpt_dir.string());
    mode_tag = info.mode;
  }

  // Normalized 6-vector prediction (1x6 node).
  nn::Var<S> forward(nn::Tape<S> &tape, const nn::LeafTable<S> &leaves, const PatchGrid<S> &pg,
                     int plane_id) const {
    PGWM_CHECK(plane_id >= 0 && plane_id < static_cast<int>(plane_tokens.size()),
               InvalidArgument, "guidance forward: unknown plane id " + std::to_string(plane_id));
    auto ctx = encoder.encode_full(tape, leaves, pg);
    auto ctx_in = nn::add(tape, ctx.tokens, predictor.positions_for(tape, ctx.patch_indices));
    auto seq = nn::concat_rows<S>(tape, {ctx_in, leaves[plane_tokens[plane_id]]});
    auto h = predictor.stack.forward(tape, leaves, predictor.in_proj.forward(tape, leaves, seq));
    auto pooled = nn::mean_rows(tape, h);
    return head.forward(tape, leaves, pooled);
  }

  // Prediction in native units (mm, deg).
  std::array<double, 6> predict(nn::Tape<S> &tape, const nn::LeafTable<S> &leaves,
                                const PatchGrid<S> &pg, int plane_id) const {
    auto out = forward(tape, leaves, pg, plane_id);
    std::array<double, 6> pred{};
    for (int i = 0; i < 6; ++i) {
      const double scale = i < 3 ? kPoseScaleMm : kPoseScaleDeg;
      pred[i] = static_cast<double>(out->val()(0, i)) * scale;
      if (!std::isfinite(pred[i]))
        throw Error("non-finite-output", "guidance forward produced non-finite output");
    }
    return pred;
  }

  // Mean absolute error on normalized labels (the fine-tuning objective,
  // matching the MAE evaluation metric).
  nn::Var<S> sample_loss(nn::Tape<S> &tape, const nn::LeafTable<S> &leaves,
                         const PatchGrid<S> &pg, int plane_id, const PoseDelta &label) const {
    auto out = forward(tape, leaves, pg, plane_id);
    nn::Mat<S> target = pose_delta_row<S>(label).array() * pose_inverse_scales<S>().array();
    auto diff = nn::sub(tape, out, tape.input(std::move(target)));
    return nn::scale(tape, nn::sum_all(tape, nn::abs_elem(tape, diff)), S(1.0 / 6.0));
  }
};

template <class S>
void save_guidance_model(const std::filesystem::path &dir, const GuidanceModel<S> &model) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["mode"] = model.mode_tag;
  j["num_planes"] = model.plane_tokens.size();
  j["encoder"] = {{"depth", model.enc_cfg.depth},
                  {"hidden_dim", model.enc_cfg.hidden_dim},
                  {"num_heads", model.enc_cfg.num_heads},
                  {"patch_size", model.enc_cfg.patch_size},
                  {"image_size", model.enc_cfg.image_size},
                  {"mlp_ratio", model.enc_cfg.mlp_ratio}};
  j["predictor"] = {{"depth", model.pred_cfg.depth},
                    {"hidden_dim", model.pred_cfg.hidden_dim},
                    {"num_heads", model.pred_cfg.num_heads},
                    {"mlp_ratio", model.pred_cfg.mlp_ratio},
                    {"pose_mlp_depth", model.pred_cfg.pose_mlp_depth}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write guidance model manifest in " + dir.string());
  out << j.dump(2) << "\n";
  save_param_sections<S>(dir / "params.bin", {{"guidance", &model.params}});
}

template <class S>
GuidanceModel<S> load_guidance_model(const std::filesystem::path &dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("missing guidance model manifest: " + (dir / "manifest.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception &e) {
    throw FormatError("corrupt guidance model manifest in " + dir.string() + ": " + e.what());
  }
  EncoderConfig ec;
  const auto &e = j.at("encoder");
  ec.depth = e.at("depth").get<int>();
  ec.hidden_dim = e.at("hidden_dim").get<int>();
  ec.num_heads = e.at("num_heads").get<int>();
  ec.patch_size = e.at("patch_size").get<int>();
  ec.image_size = e.at("image_size").get<int>();
  ec.mlp_ratio = e.at("mlp_ratio").get<double>();
  PredictorConfig pc;
  const auto &p = j.at("predictor");
  pc.depth = p.at("depth").get<int>();
  pc.hidden_dim = p.at("hidden_dim").get<int>();
  pc.num_heads = p.at("num_heads").get<int>();
  pc.mlp_ratio = p.at("mlp_ratio").get<double>();
  pc.pose_mlp_depth = p.at("pose_mlp_depth").get<int>();

  auto model = GuidanceModel<S>::create(ec, pc, j.at("num_planes").get<int>(), 0);
  model.mode_tag = j.value("mode", "scratch");
  load_param_sections<S>(dir / "params.bin", {{"guidance", &model.params}});
  return model;
}

} // namespace pgwm
