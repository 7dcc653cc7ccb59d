#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradcheck_util.hpp"
#include "pgwm/nn/layers.hpp"
#include "pgwm/nn/optim.hpp"
#include "pgwm/nn/positional.hpp"

using namespace pgwm;
using namespace pgwm::testutil;
using nn::Tape;
using nn::Var;

namespace {

using UnaryOp = std::function<Var<double>(Tape<double> &, Var<double>)>;

// Gradient check for one op: objective = sum(op(x) .* w) with a fixed random
// weighting so every output entry contributes.
double check_unary_op(const UnaryOp &op, Eigen::Index rows, Eigen::Index cols, uint64_t seed,
                      double input_scale = 1.0) {
  Rng rng(seed);
  Md x = random_mat(rows, cols, rng, input_scale);
  Md w;
  {
    Tape<double> probe;
    auto out = op(probe, probe.input(Md(x), false));
    w = random_mat(out->val().rows(), out->val().cols(), rng);
  }
  auto eval = [&]() {
    Tape<double> t;
    auto out = op(t, t.input(Md(x), false));
    return (out->val().array() * w.array()).sum();
  };
  Tape<double> t;
  auto xv = t.input(Md(x), true);
  auto loss = nn::sum_all(t, nn::mul_elem_const(t, op(t, xv), Md(w)));
  t.backward(loss);
  return max_grad_rel_error(x, xv->grad, eval);
}

} // namespace

TEST_CASE("matmul gradients") {
  Rng rng(1);
  Md a = random_mat(5, 4, rng);
  Md b = random_mat(4, 6, rng);
  Md w = random_mat(5, 6, rng);
  auto eval = [&]() { return ((a * b).array() * w.array()).sum(); };
  Tape<double> t;
  auto av = t.input(Md(a), true);
  auto bv = t.input(Md(b), true);
  auto loss = nn::sum_all(t, nn::mul_elem_const(t, nn::matmul(t, av, bv), Md(w)));
  t.backward(loss);
  CHECK(max_grad_rel_error(a, av->grad, eval) < 1e-6);
  CHECK(max_grad_rel_error(b, bv->grad, eval) < 1e-6);
}

TEST_CASE("matmul_nt gradients") {
  Rng rng(2);
  Md a = random_mat(5, 4, rng);
  Md b = random_mat(7, 4, rng);
  Md w = random_mat(5, 7, rng);
  auto eval = [&]() { return ((a * b.transpose()).array() * w.array()).sum(); };
  Tape<double> t;
  auto av = t.input(Md(a), true);
  auto bv = t.input(Md(b), true);
  auto loss = nn::sum_all(t, nn::mul_elem_const(t, nn::matmul_nt(t, av, bv), Md(w)));
  t.backward(loss);
  CHECK(max_grad_rel_error(a, av->grad, eval) < 1e-6);
  CHECK(max_grad_rel_error(b, bv->grad, eval) < 1e-6);
}

TEST_CASE("softmax row gradients") {
  auto op = [](Tape<double> &t, Var<double> x) { return nn::softmax_rows(t, x); };
  CHECK(check_unary_op(op, 6, 9, 3) < 1e-6);
}

TEST_CASE("gelu gradients") {
  auto op = [](Tape<double> &t, Var<double> x) { return nn::gelu(t, x); };
  CHECK(check_unary_op(op, 4, 8, 4, 2.0) < 1e-6);
}

TEST_CASE("plain layer norm gradients") {
  auto op = [](Tape<double> &t, Var<double> x) {
    return nn::layer_norm<double>(t, x, nullptr, nullptr);
  };
  CHECK(check_unary_op(op, 5, 12, 5) < 1e-5);
}

TEST_CASE("affine layer norm gradients including gamma and beta") {
  Rng rng(6);
  Md x = random_mat(4, 10, rng);
  Md gamma = random_mat(1, 10, rng, 0.5);
  Md beta = random_mat(1, 10, rng, 0.5);
  Md w = random_mat(4, 10, rng);
  auto run = [&](Tape<double> &t, bool rg) {
    auto xv = t.input(Md(x), rg);
    auto gv = t.input(Md(gamma), rg);
    auto bv = t.input(Md(beta), rg);
    auto out = nn::layer_norm(t, xv, gv, bv);
    auto loss = nn::sum_all(t, nn::mul_elem_const(t, out, Md(w)));
    return std::tuple{xv, gv, bv, loss};
  };
  auto eval = [&]() {
    Tape<double> t;
    auto [xv, gv, bv, loss] = run(t, false);
    return loss->val()(0, 0);
  };
  Tape<double> t;
  auto [xv, gv, bv, loss] = run(t, true);
  t.backward(loss);
  CHECK(max_grad_rel_error(x, xv->grad, eval) < 1e-5);
  CHECK(max_grad_rel_error(gamma, gv->grad, eval) < 1e-6);
  CHECK(max_grad_rel_error(beta, bv->grad, eval) < 1e-6);
}

TEST_CASE("smooth_l1 gradients across both branches") {
  // inputs straddle the quadratic/linear boundary
  auto op = [](Tape<double> &t, Var<double> x) { return nn::smooth_l1(t, x); };
  CHECK(check_unary_op(op, 6, 6, 7, 1.5) < 1e-5);
}

TEST_CASE("abs gradients") {
  auto op = [](Tape<double> &t, Var<double> x) { return nn::abs_elem(t, x); };
  CHECK(check_unary_op(op, 5, 5, 8, 2.0) < 1e-6);
}

TEST_CASE("slice and concat gradients") {
  auto op_rows = [](Tape<double> &t, Var<double> x) {
    auto top = nn::slice_rows(t, x, 0, 3);
    auto bottom = nn::slice_rows(t, x, 3, 4);
    return nn::concat_rows<double>(t, {bottom, top});
  };
  CHECK(check_unary_op(op_rows, 7, 5, 9) < 1e-6);

  auto op_cols = [](Tape<double> &t, Var<double> x) {
    auto l = nn::slice_cols(t, x, 0, 2);
    auto r = nn::slice_cols(t, x, 2, 6);
    return nn::concat_cols<double>(t, {r, l});
  };
  CHECK(check_unary_op(op_cols, 4, 8, 10) < 1e-6);
}

TEST_CASE("gather_rows gradients with repeated indices") {
  auto op = [](Tape<double> &t, Var<double> x) {
    return nn::gather_rows(t, x, {0, 2, 2, 4, 1});
  };
  CHECK(check_unary_op(op, 5, 6, 11) < 1e-6);
}

TEST_CASE("repeat_row and mean_rows gradients") {
  auto op_rep = [](Tape<double> &t, Var<double> x) { return nn::repeat_row(t, x, 5); };
  CHECK(check_unary_op(op_rep, 1, 7, 12) < 1e-6);
  auto op_mean = [](Tape<double> &t, Var<double> x) { return nn::mean_rows(t, x); };
  CHECK(check_unary_op(op_mean, 6, 4, 13) < 1e-6);
}

TEST_CASE("broadcast add and row-scale gradients") {
  Rng rng(14);
  Md x = random_mat(5, 6, rng);
  Md b = random_mat(1, 6, rng);
  Md w = random_mat(5, 6, rng);
  auto eval = [&]() {
    Tape<double> t;
    auto out = nn::add_rowvec(t, t.input(Md(x), false), t.input(Md(b), false));
    return (out->val().array() * w.array()).sum();
  };
  Tape<double> t;
  auto xv = t.input(Md(x), true);
  auto bv = t.input(Md(b), true);
  auto loss = nn::sum_all(t, nn::mul_elem_const(t, nn::add_rowvec(t, xv, bv), Md(w)));
  t.backward(loss);
  CHECK(max_grad_rel_error(x, xv->grad, eval) < 1e-6);
  CHECK(max_grad_rel_error(b, bv->grad, eval) < 1e-6);
}

TEST_CASE("attention layer end-to-end gradients") {
  Rng rng(15);
  nn::ParamStore<double> store;
  auto attn = nn::AttentionLayer<double>::create(store, "attn", 8, 2, rng);
  Md x = random_mat(5, 8, rng);
  Md w = random_mat(5, 8, rng);

  auto eval = [&]() {
    Tape<double> t;
    auto leaves = nn::make_leaves(t, store, false);
    auto out = attn.forward(t, leaves, t.input(Md(x), false));
    return (out->val().array() * w.array()).sum();
  };

  Tape<double> t;
  auto leaves = nn::make_leaves(t, store, true);
  auto xv = t.input(Md(x), true);
  auto loss = nn::sum_all(t, nn::mul_elem_const(t, attn.forward(t, leaves, xv), Md(w)));
  t.backward(loss);

  CHECK(max_grad_rel_error(x, xv->grad, eval) < 1e-5);
  for (int i = 0; i < store.size(); ++i) {
    INFO("param ", store.name(i));
    Md grad = leaves[i]->has_grad() ? leaves[i]->grad : Md();
    CHECK(max_grad_rel_error(store.value(i), grad, eval) < 1e-5);
  }
}

TEST_CASE("transformer block gradients for every parameter") {
  Rng rng(16);
  nn::ParamStore<double> store;
  auto block = nn::TransformerBlock<double>::create(store, "blk", 8, 2, 2.0, rng);
  Md x = random_mat(4, 8, rng);
  Md w = random_mat(4, 8, rng);

  auto eval = [&]() {
    Tape<double> t;
    auto leaves = nn::make_leaves(t, store, false);
    auto out = block.forward(t, leaves, t.input(Md(x), false));
    return (out->val().array() * w.array()).sum();
  };

  Tape<double> t;
  auto leaves = nn::make_leaves(t, store, true);
  auto xv = t.input(Md(x), true);
  auto loss = nn::sum_all(t, nn::mul_elem_const(t, block.forward(t, leaves, xv), Md(w)));
  t.backward(loss);

  CHECK(max_grad_rel_error(x, xv->grad, eval) < 1e-3);
  for (int i = 0; i < store.size(); ++i) {
    INFO("param ", store.name(i));
    Md grad = leaves[i]->has_grad() ? leaves[i]->grad : Md();
    CHECK(max_grad_rel_error(store.value(i), grad, eval) < 1e-3);
  }
}

TEST_CASE("tape truncation keeps leaf gradients across samples") {
  Rng rng(17);
  nn::ParamStore<double> store;
  const int idx = store.add("w", 3, 3);
  store.value(idx) = random_mat(3, 3, rng);

  Tape<double> t;
  auto leaves = nn::make_leaves(t, store, true);
  const size_t base = t.mark();
  Md x1 = random_mat(2, 3, rng), x2 = random_mat(2, 3, rng);

  auto loss1 = nn::sum_all(t, nn::matmul(t, t.input(Md(x1), false), leaves[idx]));
  t.backward(loss1);
  t.truncate(base);
  Md grad_after_one = leaves[idx]->grad;

  auto loss2 = nn::sum_all(t, nn::matmul(t, t.input(Md(x2), false), leaves[idx]));
  t.backward(loss2);
  t.truncate(base);

  // gradient accumulates across both samples
  Md expect1 = Md::Zero(3, 3), expect12 = Md::Zero(3, 3);
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 3; ++r) {
      expect1(r, c) = x1.col(r).sum();
      expect12(r, c) = x1.col(r).sum() + x2.col(r).sum();
    }
  CHECK((grad_after_one - expect1).norm() < 1e-12);
  CHECK((leaves[idx]->grad - expect12).norm() < 1e-12);
}

TEST_CASE("adamw converges on a quadratic and respects no_decay") {
  nn::ParamStore<double> store;
  const int widx = store.add("w", 1, 1);
  store.value(widx)(0, 0) = 5.0;
  nn::AdamW<double> opt;
  opt.weight_decay = 0.0;
  for (int k = 0; k < 400; ++k) {
    nn::GradTable<double> g(1);
    g.grads[0] = Md::Constant(1, 1, 2.0 * (store.value(widx)(0, 0) - 1.5));
    opt.step(store, g, 0.05);
  }
  CHECK(store.value(widx)(0, 0) == doctest::Approx(1.5).epsilon(1e-3));
}

TEST_CASE("ema update endpoints and midpoint") {
  nn::ParamStore<double> student, teacher;
  student.add("w", 2, 2);
  teacher.add("w", 2, 2);
  student.value(0).setConstant(2.0);
  teacher.value(0).setConstant(0.0);

  nn::ema_update(student, teacher, 1.0);
  CHECK(teacher.value(0)(0, 0) == 0.0); // unchanged

  nn::ema_update(student, teacher, 0.5);
  CHECK(teacher.value(0)(0, 0) == 1.0);

  nn::ema_update(student, teacher, 0.0);
  CHECK(teacher.value(0)(0, 0) == 2.0); // copied

  nn::ParamStore<double> mismatched;
  mismatched.add("w", 3, 2);
  CHECK_THROWS_AS(nn::ema_update(student, mismatched, 0.5), MismatchError);
}

TEST_CASE("positional embedding rows depend only on grid coordinates") {
  auto pe = nn::sincos_position_embedding<double>(4, 4, 16);
  CHECK(pe.rows() == 16);
  CHECK(pe.cols() == 16);
  auto pe_big = nn::sincos_position_embedding<double>(6, 4, 16);
  // same (row, col) coordinate gives the same embedding row in both grids
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK((pe.row(r * 4 + c) - pe_big.row(r * 4 + c)).norm() < 1e-12);
  CHECK_THROWS_AS(nn::sincos_position_embedding<double>(4, 4, 18), InvalidArgument);
}

TEST_CASE("dead branches never produce gradients") {
  Rng rng(19);
  nn::ParamStore<double> store;
  const int used = store.add("used", 2, 2);
  const int unused = store.add("unused", 2, 2);
  store.value(used) = random_mat(2, 2, rng);
  store.value(unused) = random_mat(2, 2, rng);

  Tape<double> t;
  auto leaves = nn::make_leaves(t, store, true);
  auto loss = nn::sum_all(t, nn::matmul(t, t.input(random_mat(2, 2, rng), false), leaves[used]));
  t.backward(loss);
  CHECK(leaves[used]->has_grad());
  CHECK_FALSE(leaves[unused]->has_grad());
}
