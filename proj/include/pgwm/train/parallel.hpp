#pragma once

#include <exception>
#include <thread>

#include "pgwm/nn/params.hpp"

namespace pgwm {

// Data-parallel forward/backward over one batch. Worker w handles items
// w, w+W, ... with its own tape; parameter values are shared read-only.
// Per-item losses land in item order and worker gradients are reduced in
// worker order, so results are deterministic for a fixed worker count (and
// the loss vector is deterministic regardless of worker count).
//
// LossFn: (Tape<S>&, const LeafTable<S>& student, const LeafTable<S>& teacher,
//          int item) -> Var<S> scalar loss.
template <class S, class LossFn>
std::vector<double> parallel_batch_backward(const nn::ParamStore<S> &params,
                                            const nn::ParamStore<S> *teacher_params,
                                            int n_items, int n_workers,
                                            nn::GradTable<S> &grad_out, LossFn &&loss_fn) {
  n_workers = std::max(1, std::min(n_workers, n_items));
  std::vector<double> losses(n_items, 0.0);
  std::vector<nn::GradTable<S>> worker_grads(n_workers);
  std::vector<std::exception_ptr> worker_errors(n_workers);

  auto worker = [&](int w) {
    try {
      nn::Tape<S> tape;
      auto student = nn::make_leaves(tape, params, /*requires_grad=*/true);
      nn::LeafTable<S> teacher;
      if (teacher_params) teacher = nn::make_leaves(tape, *teacher_params, false);
      const size_t base = tape.mark();
      for (int i = w; i < n_items; i += n_workers) {
        auto loss = loss_fn(tape, student, teacher, i);
        losses[i] = static_cast<double>(loss->val()(0, 0));
        tape.backward(loss);
        tape.truncate(base);
      }
      worker_grads[w] = nn::GradTable<S>(params.size());
      worker_grads[w].harvest(student);
    } catch (...) {
      worker_errors[w] = std::current_exception();
    }
  };

  if (n_workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers - 1);
    for (int w = 1; w < n_workers; ++w) threads.emplace_back(worker, w);
    worker(0);
    for (auto &t : threads) t.join();
  }

  for (int w = 0; w < n_workers; ++w)
    if (worker_errors[w]) std::rethrow_exception(worker_errors[w]);

  grad_out = nn::GradTable<S>(params.size());
  for (int w = 0; w < n_workers; ++w) grad_out.add(worker_grads[w]);
  return losses;
}

// Inference-only variant: per-item outputs, no gradients.
// EvalFn: (Tape<S>&, const LeafTable<S>&, int item) -> void (writes results).
template <class S, class EvalFn>
void parallel_batch_eval(const nn::ParamStore<S> &params, int n_items, int n_workers,
                         EvalFn &&eval_fn) {
  n_workers = std::max(1, std::min(n_workers, n_items));
  std::vector<std::exception_ptr> worker_errors(n_workers);
  auto worker = [&](int w) {
    try {
      nn::Tape<S> tape;
      auto leaves = nn::make_leaves(tape, params, /*requires_grad=*/false);
      const size_t base = tape.mark();
      for (int i = w; i < n_items; i += n_workers) {
        eval_fn(tape, leaves, i);
        tape.truncate(base);
      }
    } catch (...) {
      worker_errors[w] = std::current_exception();
    }
  };
  if (n_workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 1; w < n_workers; ++w) threads.emplace_back(worker, w);
    worker(0);
    for (auto &t : threads) t.join();
  }
  for (int w = 0; w < n_workers; ++w)
    if (worker_errors[w]) std::rethrow_exception(worker_errors[w]);
}

} // namespace pgwm
