#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "pgwm/nn/tensor.hpp"
#include "pgwm/rng.hpp"

namespace pgwm::nn {

// Flat table of named parameter matrices. Modules hold indices into the
// store; per-worker graphs alias the master values through leaf nodes.
template <class S>
class ParamStore {
public:
  struct Entry {
    std::string name;
    Mat<S> value;
    Mat<S> m, v; // optimizer moments
    bool no_decay = false;
  };

  int add(const std::string &name, Eigen::Index rows, Eigen::Index cols, bool no_decay = false) {
    PGWM_CHECK(!by_name_.count(name), InvalidArgument, "duplicate parameter name: " + name);
    Entry e;
    e.name = name;
    e.value = Mat<S>::Zero(rows, cols);
    e.no_decay = no_decay;
    by_name_[name] = static_cast<int>(entries_.size());
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
  }

  int size() const { return static_cast<int>(entries_.size()); }
  Entry &entry(int i) { return entries_[i]; }
  const Entry &entry(int i) const { return entries_[i]; }
  Mat<S> &value(int i) { return entries_[i].value; }
  const Mat<S> &value(int i) const { return entries_[i].value; }
  const std::string &name(int i) const { return entries_[i].name; }
  int find(const std::string &name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? -1 : it->second;
  }

  int64_t scalar_count() const {
    int64_t n = 0;
    for (const auto &e : entries_) n += e.value.size();
    return n;
  }

  // Copy with a possibly different scalar type (float checkpoints load into
  // double stores for verification and vice versa).
  template <class T>
  void copy_values_from(const ParamStore<T> &other) {
    PGWM_CHECK(other.size() == size(), MismatchError, "parameter store layout mismatch");
    for (int i = 0; i < size(); ++i) {
      PGWM_CHECK(other.value(i).rows() == value(i).rows() &&
                     other.value(i).cols() == value(i).cols(),
                 MismatchError, "parameter shape mismatch at " + name(i));
      value(i) = other.value(i).template cast<S>();
    }
  }

private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
};

// Truncated normal init (resampled beyond 2 sigma), the usual transformer
// weight init.
template <class S>
void init_trunc_normal(Mat<S> &m, Rng &rng, double stddev = 0.02) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double x;
      do {
        x = rng.normal(0.0, stddev);
      } while (std::abs(x) > 2.0 * stddev);
      m(r, c) = static_cast<S>(x);
    }
}

// Per-graph view of the parameter table.
template <class S>
struct LeafTable {
  std::vector<Var<S>> vars;
  const Var<S> &operator[](int i) const { return vars[i]; }
};

template <class S>
LeafTable<S> make_leaves(Tape<S> &tape, const ParamStore<S> &store, bool requires_grad) {
  LeafTable<S> t;
  t.vars.reserve(store.size());
  for (int i = 0; i < store.size(); ++i) t.vars.push_back(tape.leaf(&store.value(i), requires_grad));
  return t;
}

// Gradient accumulator aligned with a ParamStore. Missing grads stay empty.
template <class S>
struct GradTable {
  std::vector<Mat<S>> grads;

  explicit GradTable(int n = 0) : grads(n) {}

  void harvest(const LeafTable<S> &leaves) {
    for (size_t i = 0; i < leaves.vars.size(); ++i) {
      const auto &leaf = *leaves.vars[i];
      if (!leaf.has_grad()) continue;
      if (grads[i].size() == 0)
        grads[i] = leaf.grad;
      else
        grads[i] += leaf.grad;
    }
  }

  void add(const GradTable &other) {
    for (size_t i = 0; i < grads.size(); ++i) {
      if (other.grads[i].size() == 0) continue;
      if (grads[i].size() == 0)
        grads[i] = other.grads[i];
      else
        grads[i] += other.grads[i];
    }
  }

  void scale(S factor) {
    for (auto &g : grads)
      if (g.size()) g *= factor;
  }
};

} // namespace pgwm::nn
