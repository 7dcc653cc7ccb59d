#pragma once

#include <cmath>

#include "pgwm/nn/tensor.hpp"

namespace pgwm::nn {

// Fixed 2D sine-cosine positional embeddings over grid coordinates,
// row-major patch order. Row k is a pure function of the grid coordinate,
// so positions stay meaningful for patch subsets never seen in training.
// dim must be divisible by 4 (half for row coord, half for col, each split
// into sin/cos bands).
template <class S>
Mat<S> sincos_position_embedding(int rows, int cols, int dim) {
  PGWM_CHECK(dim % 4 == 0, InvalidArgument, "positional embedding dim must be divisible by 4");
  const int quarter = dim / 4;
  Mat<S> pe(rows * cols, dim);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int k = r * cols + c;
      for (int i = 0; i < quarter; ++i) {
        const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / quarter);
        pe(k, i) = static_cast<S>(std::sin(r * omega));
        pe(k, quarter + i) = static_cast<S>(std::cos(r * omega));
        pe(k, 2 * quarter + i) = static_cast<S>(std::sin(c * omega));
        pe(k, 3 * quarter + i) = static_cast<S>(std::cos(c * omega));
      }
    }
  }
  return pe;
}

} // namespace pgwm::nn
