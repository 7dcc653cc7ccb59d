#pragma once

#include "pgwm/nn/params.hpp"

namespace pgwm::nn {

// AdamW: adaptive moments with decoupled weight decay. Decay is skipped for
// parameters flagged no_decay (biases, norm gains, query tokens).
template <class S>
class AdamW {
public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;

  void step(ParamStore<S> &store, const GradTable<S> &grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (int i = 0; i < store.size(); ++i) {
      auto &e = store.entry(i);
      if (grads.grads[i].size() == 0) continue;
      const Mat<S> &g = grads.grads[i];
      PGWM_CHECK(g.rows() == e.value.rows() && g.cols() == e.value.cols(), MismatchError,
                 "gradient shape mismatch at " + e.name);
      if (e.m.size() == 0) {
        e.m = Mat<S>::Zero(g.rows(), g.cols());
        e.v = Mat<S>::Zero(g.rows(), g.cols());
      }
      e.m = S(beta1) * e.m + S(1.0 - beta1) * g;
      e.v = (S(beta2) * e.v.array() + S(1.0 - beta2) * g.array().square()).matrix();
      auto m_hat = e.m.array() / S(bc1);
      auto v_hat = e.v.array() / S(bc2);
      if (!e.no_decay && weight_decay > 0)
        e.value -= (S(lr) * S(weight_decay)) * e.value;
      e.value -= (S(lr) * m_hat / (v_hat.sqrt() + S(eps))).matrix();
    }
  }

  int64_t steps_taken() const { return t_; }
  void set_steps_taken(int64_t t) { t_ = t; }

private:
  int64_t t_ = 0;
};

// teacher <- m * teacher + (1 - m) * student, elementwise over the first
// `count` parameters (or all when count < 0).
template <class S>
void ema_update(const ParamStore<S> &student, ParamStore<S> &teacher, double m, int count = -1) {
  PGWM_CHECK(m >= 0.0 && m <= 1.0, InvalidArgument, "ema momentum must be in [0, 1]");
  const int n = count < 0 ? teacher.size() : count;
  PGWM_CHECK(n <= student.size() && n <= teacher.size(), MismatchError,
             "ema: parameter count mismatch");
  for (int i = 0; i < n; ++i) {
    PGWM_CHECK(student.value(i).rows() == teacher.value(i).rows() &&
                   student.value(i).cols() == teacher.value(i).cols(),
               MismatchError, "ema: shape mismatch at " + student.name(i));
    teacher.value(i) = S(m) * teacher.value(i) + S(1.0 - m) * student.value(i);
  }
}

} // namespace pgwm::nn
