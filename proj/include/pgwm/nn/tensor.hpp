#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "pgwm/error.hpp"

namespace pgwm::nn {

// Minimal reverse-mode autodiff over dense row-major matrices. A Tape owns
// the graph nodes in creation order (which is a valid topological order);
// backward walks the tape in reverse. Templated on the scalar so training
// runs in float while gradient verification runs the same code in double.

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class S>
struct Node {
  Mat<S> owned;                      // value storage unless external
  const Mat<S> *external = nullptr;  // parameter leaves alias master storage
  Mat<S> grad;                       // allocated lazily on first accumulation
  bool requires_grad = false;
  size_t idx = 0;                    // position in the tape
  std::function<void()> backward;    // set only for differentiable interior nodes

  const Mat<S> &val() const { return external ? *external : owned; }

  void accumulate(const Mat<S> &g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
  bool has_grad() const { return grad.size() != 0; }
};

template <class S>
using Var = std::shared_ptr<Node<S>>;

template <class S>
class Tape {
public:
  // Leaf aliasing external storage (a model parameter).
  Var<S> leaf(const Mat<S> *external, bool requires_grad) {
    auto n = std::make_shared<Node<S>>();
    n->external = external;
    n->requires_grad = requires_grad;
    n->idx = nodes_.size();
    nodes_.push_back(n);
    return n;
  }

  // Leaf owning its value (an input such as an image or pose vector).
  Var<S> input(Mat<S> v, bool requires_grad = false) {
    auto n = std::make_shared<Node<S>>();
    n->owned = std::move(v);
    n->requires_grad = requires_grad;
    n->idx = nodes_.size();
    nodes_.push_back(n);
    return n;
  }

  Var<S> make(Mat<S> v, bool requires_grad, std::function<void()> bw) {
    auto n = std::make_shared<Node<S>>();
    n->owned = std::move(v);
    n->requires_grad = requires_grad;
    if (requires_grad) n->backward = std::move(bw);
    n->idx = nodes_.size();
    nodes_.push_back(n);
    return n;
  }

  size_t mark() const { return nodes_.size(); }

  // Drop nodes created after a mark (frees one sample's subgraph while
  // keeping parameter leaves and their accumulated grads).
  void truncate(size_t mark) { nodes_.resize(mark); }

  void backward(const Var<S> &loss) {
    PGWM_CHECK(loss->val().rows() == 1 && loss->val().cols() == 1, InvalidArgument,
               "backward: loss must be a 1x1 scalar node");
    loss->accumulate(Mat<S>::Ones(1, 1));
    for (size_t i = loss->idx + 1; i-- > 0;) {
      Node<S> &n = *nodes_[i];
      if (n.has_grad() && n.backward) n.backward();
    }
  }

  void clear() { nodes_.clear(); }

private:
  std::vector<Var<S>> nodes_;
};

namespace detail {
template <class S>
bool any_grad(const std::initializer_list<Var<S>> &vs) {
  for (const auto &v : vs)
    if (v->requires_grad) return true;
  return false;
}
} // namespace detail

// ---- primitive ops -------------------------------------------------------

template <class S>
Var<S> matmul(Tape<S> &t, Var<S> a, Var<S> b) {
  PGWM_CHECK(a->val().cols() == b->val().rows(), InvalidArgument, "matmul: inner dim mismatch");
  Mat<S> v = a->val() * b->val();
  bool rg = detail::any_grad<S>({a, b});
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [a, b, o]() {
      if (a->requires_grad) a->accumulate(o->grad * b->val().transpose());
      if (b->requires_grad) b->accumulate(a->val().transpose() * o->grad);
    };
  }
  return out;
}

// a * b^T
template <class S>
Var<S> matmul_nt(Tape<S> &t, Var<S> a, Var<S> b) {
  PGWM_CHECK(a->val().cols() == b->val().cols(), InvalidArgument, "matmul_nt: dim mismatch");
  Mat<S> v = a->val() * b->val().transpose();
  bool rg = detail::any_grad<S>({a, b});
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [a, b, o]() {
      if (a->requires_grad) a->accumulate(o->grad * b->val());
      if (b->requires_grad) b->accumulate(o->grad.transpose() * a->val());
    };
  }
  return out;
}

template <class S>
Var<S> add(Tape<S> &t, Var<S> a, Var<S> b) {
  PGWM_CHECK(a->val().rows() == b->val().rows() && a->val().cols() == b->val().cols(),
             InvalidArgument, "add: shape mismatch");
  Mat<S> v = a->val() + b->val();
  bool rg = detail::any_grad<S>({a, b});
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [a, b, o]() {
      if (a->requires_grad) a->accumulate(o->grad);
      if (b->requires_grad) b->accumulate(o->grad);
    };
  }
  return out;
}

template <class S>
Var<S> sub(Tape<S> &t, Var<S> a, Var<S> b) {
  PGWM_CHECK(a->val().rows() == b->val().rows() && a->val().cols() == b->val().cols(),
             InvalidArgument, "sub: shape mismatch");
  Mat<S> v = a->val() - b->val();
  bool rg = detail::any_grad<S>({a, b});
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [a, b, o]() {
      if (a->requires_grad) a->accumulate(o->grad);
      if (b->requires_grad) b->accumulate(-o->grad);
    };
  }
  return out;
}

// broadcast-add a 1xC row vector over all L rows
template <class S>
Var<S> add_rowvec(Tape<S> &t, Var<S> a, Var<S> row) {
  PGWM_CHECK(row->val().rows() == 1 && row->val().cols() == a->val().cols(), InvalidArgument,
             "add_rowvec: needs a 1xC row");
  Mat<S> v = a->val().rowwise() + row->val().row(0);
  bool rg = detail::any_grad<S>({a, row});
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [a, row, o]() {
      if (a->requires_grad) a->accumulate(o->grad);
      if (row->requires_grad) row->accumulate(o->grad.colwise().sum());
    };
  }
  return out;
}

template <class S>
Var<S> scale(Tape<S> &t, Var<S> a, S factor) {
  Mat<S> v = a->val() * factor;
  bool rg = a->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [a, factor, o]() { a->accumulate(o->grad * factor); };
  }
  return out;
}

// elementwise multiply by a constant 1xC row, broadcast over rows
template <class S>
Var<S> mul_rowvec_const(Tape<S> &t, Var<S> a, Mat<S> row) {
  PGWM_CHECK(row.rows() == 1 && row.cols() == a->val().cols(), InvalidArgument,
             "mul_rowvec_const: needs a 1xC row");
  Mat<S> v = a->val().array().rowwise() * row.array().row(0);
  bool rg = a->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [a, row, o]() {
      a->accumulate((o->grad.array().rowwise() * row.array().row(0)).matrix());
    };
  }
  return out;
}

// elementwise multiply by a constant matrix of the same shape
template <class S>
Var<S> mul_elem_const(Tape<S> &t, Var<S> a, Mat<S> w) {
  PGWM_CHECK(w.rows() == a->val().rows() && w.cols() == a->val().cols(), InvalidArgument,
             "mul_elem_const: shape mismatch");
  Mat<S> v = a->val().array() * w.array();
  bool rg = a->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [a, w, o]() { a->accumulate((o->grad.array() * w.array()).matrix()); };
  }
  return out;
}

template <class S>
Var<S> softmax_rows(Tape<S> &t, Var<S> a) {
  Mat<S> v = a->val();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const S m = v.row(r).maxCoeff();
    v.row(r) = (v.row(r).array() - m).exp();
    v.row(r) /= v.row(r).sum();
  }
  bool rg = a->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [a, o]() {
      const Mat<S> &y = o->val();
      Mat<S> dx(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const S dot = o->grad.row(r).dot(y.row(r));
        dx.row(r) = (o->grad.row(r).array() - dot) * y.row(r).array();
      }
      a->accumulate(dx);
    };
  }
  return out;
}

// Row-wise layer normalization. gamma/beta may be null for a plain
// (affine-free) normalization.
template <class S>
Var<S> layer_norm(Tape<S> &t, Var<S> x, Var<S> gamma, Var<S> beta, S eps = S(1e-6)) {
  const Mat<S> &xv = x->val();
  const Eigen::Index L = xv.rows(), C = xv.cols();
  Mat<S> xhat(L, C);
  Mat<S> inv_std(L, 1);
  for (Eigen::Index r = 0; r < L; ++r) {
    const S mu = xv.row(r).mean();
    const S var = (xv.row(r).array() - mu).square().sum() / static_cast<S>(C);
    const S is = S(1) / std::sqrt(var + eps);
    inv_std(r, 0) = is;
    xhat.row(r) = (xv.row(r).array() - mu) * is;
  }
  Mat<S> v = xhat;
  if (gamma) v = v.array().rowwise() * gamma->val().array().row(0);
  if (beta) v = v.array().rowwise() + beta->val().array().row(0);

  bool rg = x->requires_grad || (gamma && gamma->requires_grad) || (beta && beta->requires_grad);
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [x, gamma, beta, o, xhat, inv_std]() {
      const Eigen::Index L = xhat.rows(), C = xhat.cols();
      Mat<S> dxhat = o->grad;
      if (gamma) dxhat = dxhat.array().rowwise() * gamma->val().array().row(0);
      if (gamma && gamma->requires_grad)
        gamma->accumulate((o->grad.array() * xhat.array()).colwise().sum().matrix());
      if (beta && beta->requires_grad) beta->accumulate(o->grad.colwise().sum());
      if (x->requires_grad) {
        Mat<S> dx(L, C);
        for (Eigen::Index r = 0; r < L; ++r) {
          const S m1 = dxhat.row(r).mean();
          const S m2 = (dxhat.row(r).array() * xhat.row(r).array()).mean();
          dx.row(r) =
              inv_std(r, 0) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
        }
        x->accumulate(dx);
      }
    };
  }
  return out;
}

template <class S>
Var<S> gelu(Tape<S> &t, Var<S> x) {
  constexpr double kC = 0.7978845608028654; // sqrt(2/pi)
  constexpr double kA = 0.044715;
  const Mat<S> &xv = x->val();
  Mat<S> inner = (kC * (xv.array() + kA * xv.array().cube())).matrix();
  Mat<S> tanh_i = inner.array().tanh().matrix();
  Mat<S> v = (S(0.5) * xv.array() * (S(1) + tanh_i.array())).matrix();
  bool rg = x->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [x, o, tanh_i]() {
      const Mat<S> &xv = x->val();
      auto sech2 = (S(1) - tanh_i.array().square());
      auto dinner = S(kC) * (S(1) + S(3) * S(kA) * xv.array().square());
      Mat<S> dydx =
          (S(0.5) * (S(1) + tanh_i.array()) + S(0.5) * xv.array() * sech2 * dinner).matrix();
      x->accumulate((o->grad.array() * dydx.array()).matrix());
    };
  }
  return out;
}

template <class S>
Var<S> slice_rows(Tape<S> &t, Var<S> x, Eigen::Index start, Eigen::Index count) {
  PGWM_CHECK(start >= 0 && count > 0 && start + count <= x->val().rows(), InvalidArgument,
             "slice_rows: out of range");
  Mat<S> v = x->val().middleRows(start, count);
  bool rg = x->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [x, o, start, count]() {
      Mat<S> dx = Mat<S>::Zero(x->val().rows(), x->val().cols());
      dx.middleRows(start, count) = o->grad;
      x->accumulate(dx);
    };
  }
  return out;
}

template <class S>
Var<S> slice_cols(Tape<S> &t, Var<S> x, Eigen::Index start, Eigen::Index count) {
  PGWM_CHECK(start >= 0 && count > 0 && start + count <= x->val().cols(), InvalidArgument,
             "slice_cols: out of range");
  Mat<S> v = x->val().middleCols(start, count);
  bool rg = x->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [x, o, start, count]() {
      Mat<S> dx = Mat<S>::Zero(x->val().rows(), x->val().cols());
      dx.middleCols(start, count) = o->grad;
      x->accumulate(dx);
    };
  }
  return out;
}

template <class S>
Var<S> concat_rows(Tape<S> &t, const std::vector<Var<S>> &xs) {
  PGWM_CHECK(!xs.empty(), InvalidArgument, "concat_rows: empty input");
  Eigen::Index rows = 0;
  const Eigen::Index cols = xs[0]->val().cols();
  bool rg = false;
  for (const auto &x : xs) {
    PGWM_CHECK(x->val().cols() == cols, InvalidArgument, "concat_rows: column mismatch");
    rows += x->val().rows();
    rg = rg || x->requires_grad;
  }
  Mat<S> v(rows, cols);
  Eigen::Index at = 0;
  for (const auto &x : xs) {
    v.middleRows(at, x->val().rows()) = x->val();
    at += x->val().rows();
  }
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    auto inputs = xs;
    out->backward = [inputs, o]() {
      Eigen::Index at = 0;
      for (const auto &x : inputs) {
        if (x->requires_grad) x->accumulate(o->grad.middleRows(at, x->val().rows()));
        at += x->val().rows();
      }
    };
  }
  return out;
}

template <class S>
Var<S> concat_cols(Tape<S> &t, const std::vector<Var<S>> &xs) {
  PGWM_CHECK(!xs.empty(), InvalidArgument, "concat_cols: empty input");
  Eigen::Index cols = 0;
  const Eigen::Index rows = xs[0]->val().rows();
  bool rg = false;
  for (const auto &x : xs) {
    PGWM_CHECK(x->val().rows() == rows, InvalidArgument, "concat_cols: row mismatch");
    cols += x->val().cols();
    rg = rg || x->requires_grad;
  }
  Mat<S> v(rows, cols);
  Eigen::Index at = 0;
  for (const auto &x : xs) {
    v.middleCols(at, x->val().cols()) = x->val();
    at += x->val().cols();
  }
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    auto inputs = xs;
    out->backward = [inputs, o]() {
      Eigen::Index at = 0;
      for (const auto &x : inputs) {
        if (x->requires_grad) x->accumulate(o->grad.middleCols(at, x->val().cols()));
        at += x->val().cols();
      }
    };
  }
  return out;
}

template <class S>
Var<S> gather_rows(Tape<S> &t, Var<S> x, std::vector<int> indices) {
  PGWM_CHECK(!indices.empty(), InvalidArgument, "gather_rows: empty index list");
  for (int i : indices)
    PGWM_CHECK(i >= 0 && i < static_cast<int>(x->val().rows()), InvalidArgument,
               "gather_rows: index out of range");
  Mat<S> v(static_cast<Eigen::Index>(indices.size()), x->val().cols());
  for (size_t k = 0; k < indices.size(); ++k) v.row(k) = x->val().row(indices[k]);
  bool rg = x->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [x, o, indices]() {
      Mat<S> dx = Mat<S>::Zero(x->val().rows(), x->val().cols());
      for (size_t k = 0; k < indices.size(); ++k) dx.row(indices[k]) += o->grad.row(k);
      x->accumulate(dx);
    };
  }
  return out;
}

// broadcast a 1xC row to L identical rows
template <class S>
Var<S> repeat_row(Tape<S> &t, Var<S> x, Eigen::Index rows) {
  PGWM_CHECK(x->val().rows() == 1, InvalidArgument, "repeat_row: input must be 1xC");
  Mat<S> v = x->val().replicate(rows, 1);
  bool rg = x->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [x, o]() { x->accumulate(o->grad.colwise().sum()); };
  }
  return out;
}

template <class S>
Var<S> mean_rows(Tape<S> &t, Var<S> x) {
  Mat<S> v = x->val().colwise().mean();
  bool rg = x->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [x, o]() {
      const S inv = S(1) / static_cast<S>(x->val().rows());
      x->accumulate((o->grad * inv).replicate(x->val().rows(), 1));
    };
  }
  return out;
}

template <class S>
Var<S> sum_all(Tape<S> &t, Var<S> x) {
  Mat<S> v(1, 1);
  v(0, 0) = x->val().sum();
  bool rg = x->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [x, o]() {
      x->accumulate(Mat<S>::Constant(x->val().rows(), x->val().cols(), o->grad(0, 0)));
    };
  }
  return out;
}

template <class S>
Var<S> add_scalars(Tape<S> &t, const std::vector<Var<S>> &xs) {
  PGWM_CHECK(!xs.empty(), InvalidArgument, "add_scalars: empty input");
  Mat<S> v = Mat<S>::Zero(1, 1);
  bool rg = false;
  for (const auto &x : xs) {
    PGWM_CHECK(x->val().rows() == 1 && x->val().cols() == 1, InvalidArgument,
               "add_scalars: inputs must be scalars");
    v(0, 0) += x->val()(0, 0);
    rg = rg || x->requires_grad;
  }
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    auto inputs = xs;
    out->backward = [inputs, o]() {
      for (const auto &x : inputs)
        if (x->requires_grad) x->accumulate(o->grad);
    };
  }
  return out;
}

// Elementwise smooth-L1 with beta = 1: 0.5*d^2 for |d| < 1, |d| - 0.5 else.
template <class S>
Var<S> smooth_l1(Tape<S> &t, Var<S> d) {
  const auto dv = d->val().array();
  Mat<S> v = (dv.abs() < S(1)).select(S(0.5) * dv.square(), dv.abs() - S(0.5));
  bool rg = d->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [d, o]() {
      const auto dv = d->val().array();
      Mat<S> sgn = (dv > S(0)).select(Mat<S>::Constant(dv.rows(), dv.cols(), S(1)),
                                      Mat<S>::Constant(dv.rows(), dv.cols(), S(-1)));
      Mat<S> dd = (dv.abs() < S(1)).select(d->val(), sgn);
      d->accumulate((o->grad.array() * dd.array()).matrix());
    };
  }
  return out;
}

template <class S>
Var<S> abs_elem(Tape<S> &t, Var<S> d) {
  Mat<S> v = d->val().array().abs();
  bool rg = d->requires_grad;
  auto out = t.make(std::move(v), rg, nullptr);
  if (rg) {
    Node<S> *o = out.get();
    out->backward = [d, o]() {
      const auto dv = d->val().array();
      Mat<S> zeros = Mat<S>::Zero(dv.rows(), dv.cols());
      Mat<S> pos = (dv > S(0)).select(Mat<S>::Constant(dv.rows(), dv.cols(), S(1)), zeros);
      Mat<S> sgn = (dv < S(0)).select(Mat<S>::Constant(dv.rows(), dv.cols(), S(-1)), pos);
      d->accumulate((o->grad.array() * sgn.array()).matrix());
    };
  }
  return out;
}

template <class S>
Var<S> linear(Tape<S> &t, Var<S> x, Var<S> w, Var<S> b) {
  auto y = matmul(t, x, w);
  return b ? add_rowvec(t, y, b) : y;
}

} // namespace pgwm::nn
