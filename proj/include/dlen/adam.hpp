#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dlen/tensor.hpp"

namespace dlen {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment buffers for a fixed list of parameters (same order as passed to adam_step).
template <typename T>
struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  AdamState() = default;
  AdamState(std::span<const Tensor<T>> params, AdamOptions opts);
};

// One bias-corrected Adam update:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
//   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps).
// Parameters without an accumulated gradient are treated as having a zero gradient.
template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state);

}  // namespace dlen
