#pragma once

#include <vector>

#include "dlen/tensor.hpp"

namespace dlen {

// Channel ("transposed") attention over NCHW maps split into `heads` channel groups.
// Per head with channel-major tokens q, k, v of shape [d, HW], q and k rows scaled to
// unit L2 norm over pixels:
//   A = softmax(k q^T / scale_h) over the key axis, so every column of A sums to 1,
//   out = A^T v.
// `scale` holds one temperature per head and must be nonzero. When `maps` is given the
// attention matrices ([N, heads, d, d]) are appended to it.
template <typename T>
Tensor<T> channel_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                            const Tensor<T>& scale, std::vector<Tensor<T>>* maps = nullptr);

}  // namespace dlen
