#pragma once

#include <vector>

#include "dlen/tensor.hpp"

// Differentiable operations. All image-like tensors use NCHW layout.
//
// Broadcasting (elementwise ops) is one-sided: the right operand `b` may be a single
// value, or have the same rank as `a` with every extent either equal to a's or 1. The
// output always has a's shape. Gradients for b are summed over the broadcast axes.
namespace dlen {

enum class BinaryKind { add, sub, mul, div };

template <typename T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(a, b, BinaryKind::add);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(a, b, BinaryKind::sub);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(a, b, BinaryKind::mul);
}
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(a, b, BinaryKind::div);
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value);
template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T value);

template <typename T>
Tensor<T> abs(const Tensor<T>& x);

// Exact GELU, x * Phi(x) with Phi the standard normal CDF.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

// Sum of all elements as a rank-0 tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

// Mean over `axes`. Reduced axes are removed unless keepdim is set. An empty axis list
// is the identity.
template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x, const std::vector<int>& axes, bool keepdim = false);
template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, const std::vector<int>& axes, bool keepdim = false);

// x / max(||x||_2, eps) along `axis`.
template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x, int axis, T eps = T(1e-12));

// Numerically stable softmax (max subtraction) along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis);

// Normalizes over `axis` to zero mean / unit (population) variance, then applies
// gamma * xhat + beta with gamma, beta of shape [x.dim(axis)].
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
                     int axis = -1);

// Batched matrix product over the last two axes; leading extents must agree exactly.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape);

// out.shape[i] = x.shape[order[i]].
template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& order);

// Swaps the last two axes.
template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);

// Contiguous range [start, start + length) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::size_t start, std::size_t length);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

// Cross-correlation (no kernel flip) with zero padding.
// x: [N, C_in, H, W], weight: [C_out, C_in / groups, kh, kw], bias: [C_out] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions options = {});

// Adjoint of conv2d without padding. x: [N, C_in, H, W], weight: [C_in, C_out, kh, kw],
// output [N, C_out, (H - 1) * stride + kh, (W - 1) * stride + kw].
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           std::size_t stride);

// Reflect padding (edge not repeated) on the two trailing axes.
template <typename T>
Tensor<T> pad_reflect(const Tensor<T>& x, std::size_t top, std::size_t bottom, std::size_t left,
                      std::size_t right);

// Non-overlapping k x k average pooling on the two trailing axes; extents must divide by k.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t k);

// Bilinear resampling of the two trailing axes (half-pixel centers, edge clamped).
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::size_t height, std::size_t width);

}  // namespace dlen
