#pragma once

#include <cmath>

#include "pgwm/nn/params.hpp"

namespace pgwm::nn {

// Transformer building blocks. Modules are lightweight descriptors holding
// parameter indices; forward passes thread a Tape and a LeafTable through.

template <class S>
struct LinearLayer {
  int w = -1, b = -1;
  Eigen::Index in = 0, out = 0;

  static LinearLayer create(ParamStore<S> &store, const std::string &prefix, Eigen::Index in,
                            Eigen::Index out, Rng &rng, bool bias = true) {
    LinearLayer l;
    l.in = in;
    l.out = out;
    l.w = store.add(prefix + ".w", in, out);
    init_trunc_normal(store.value(l.w), rng);
    if (bias) l.b = store.add(prefix + ".b", 1, out, /*no_decay=*/true);
    return l;
  }

  Var<S> forward(Tape<S> &t, const LeafTable<S> &p, Var<S> x) const {
    return linear(t, x, p[w], b >= 0 ? p[b] : nullptr);
  }
};

template <class S>
struct LayerNormLayer {
  int gamma = -1, beta = -1;

  static LayerNormLayer create(ParamStore<S> &store, const std::string &prefix,
                               Eigen::Index dim) {
    LayerNormLayer l;
    l.gamma = store.add(prefix + ".gamma", 1, dim, /*no_decay=*/true);
    store.value(l.gamma).setOnes();
    l.beta = store.add(prefix + ".beta", 1, dim, /*no_decay=*/true);
    return l;
  }

  Var<S> forward(Tape<S> &t, const LeafTable<S> &p, Var<S> x) const {
    return layer_norm(t, x, p[gamma], p[beta]);
  }
};

template <class S>
struct AttentionLayer {
  LinearLayer<S> qkv, proj;
  int heads = 0;
  Eigen::Index dim = 0;

  static AttentionLayer create(ParamStore<S> &store, const std::string &prefix, Eigen::Index dim,
                               int heads, Rng &rng) {
    PGWM_CHECK(dim % heads == 0, InvalidArgument, "attention: heads must divide dim");
    AttentionLayer a;
    a.dim = dim;
    a.heads = heads;
    a.qkv = LinearLayer<S>::create(store, prefix + ".qkv", dim, 3 * dim, rng);
    a.proj = LinearLayer<S>::create(store, prefix + ".proj", dim, dim, rng);
    return a;
  }

  Var<S> forward(Tape<S> &t, const LeafTable<S> &p, Var<S> x) const {
    const Eigen::Index dh = dim / heads;
    const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dh));
    auto qkv_out = qkv.forward(t, p, x);
    auto q = slice_cols(t, qkv_out, 0, dim);
    auto k = slice_cols(t, qkv_out, dim, dim);
    auto v = slice_cols(t, qkv_out, 2 * dim, dim);
    std::vector<Var<S>> head_outs;
    head_outs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
      auto qh = slice_cols(t, q, h * dh, dh);
      auto kh = slice_cols(t, k, h * dh, dh);
      auto vh = slice_cols(t, v, h * dh, dh);
      auto scores = scale(t, matmul_nt(t, qh, kh), inv_sqrt);
      auto attn = softmax_rows(t, scores);
      head_outs.push_back(matmul(t, attn, vh));
    }
    auto merged = heads == 1 ? head_outs[0] : concat_cols(t, head_outs);
    return proj.forward(t, p, merged);
  }
};

template <class S>
struct MlpLayer {
  LinearLayer<S> fc1, fc2;

  static MlpLayer create(ParamStore<S> &store, const std::string &prefix, Eigen::Index dim,
                         Eigen::Index hidden, Rng &rng) {
    MlpLayer m;
    m.fc1 = LinearLayer<S>::create(store, prefix + ".fc1", dim, hidden, rng);
    m.fc2 = LinearLayer<S>::create(store, prefix + ".fc2", hidden, dim, rng);
    return m;
  }

  Var<S> forward(Tape<S> &t, const LeafTable<S> &p, Var<S> x) const {
    return fc2.forward(t, p, gelu(t, fc1.forward(t, p, x)));
  }
};

// Pre-norm transformer block.
template <class S>
struct TransformerBlock {
  LayerNormLayer<S> ln1, ln2;
  AttentionLayer<S> attn;
  MlpLayer<S> mlp;

  static TransformerBlock create(ParamStore<S> &store, const std::string &prefix,
                                 Eigen::Index dim, int heads, double mlp_ratio, Rng &rng) {
    TransformerBlock b;
    b.ln1 = LayerNormLayer<S>::create(store, prefix + ".ln1", dim);
    b.attn = AttentionLayer<S>::create(store, prefix + ".attn", dim, heads, rng);
    b.ln2 = LayerNormLayer<S>::create(store, prefix + ".ln2", dim);
    b.mlp = MlpLayer<S>::create(store, prefix + ".mlp",
                                dim, static_cast<Eigen::Index>(dim * mlp_ratio), rng);
    return b;
  }

  Var<S> forward(Tape<S> &t, const LeafTable<S> &p, Var<S> x) const {
    x = add(t, x, attn.forward(t, p, ln1.forward(t, p, x)));
    x = add(t, x, mlp.forward(t, p, ln2.forward(t, p, x)));
    return x;
  }
};

// Block stack with a final layer norm.
template <class S>
struct TransformerStack {
  std::vector<TransformerBlock<S>> blocks;
  LayerNormLayer<S> final_ln;

  static TransformerStack create(ParamStore<S> &store, const std::string &prefix,
                                 Eigen::Index dim, int depth, int heads, double mlp_ratio,
                                 Rng &rng) {
    TransformerStack s;
    for (int i = 0; i < depth; ++i)
      s.blocks.push_back(TransformerBlock<S>::create(store, prefix + ".block" + std::to_string(i),
                                                     dim, heads, mlp_ratio, rng));
    s.final_ln = LayerNormLayer<S>::create(store, prefix + ".ln_final", dim);
    return s;
  }

  Var<S> forward(Tape<S> &t, const LeafTable<S> &p, Var<S> x) const {
    for (const auto &b : blocks) x = b.forward(t, p, x);
    return final_ln.forward(t, p, x);
  }
};

} // namespace pgwm::nn
