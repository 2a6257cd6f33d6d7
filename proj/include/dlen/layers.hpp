#pragma once

#include <cstddef>
#include <string>

#include "dlen/ops.hpp"

namespace dlen {

enum class InitKind {
  fan_in_normal,  // N(0, 1 / fan_in)
  zeros,
  ones,
  haar_low,   // [1/sqrt2, 1/sqrt2]
  haar_high,  // [1/sqrt2, -1/sqrt2]
};

struct InitSpec {
  InitKind kind = InitKind::zeros;
  std::size_t fan_in = 1;
};

// Parameter visitors are called as visitor(name, tensor, init) in a fixed order that
// defines parameter naming, initialization draws and checkpoint layout.

// conv2d weights and optional bias.
template <typename T>
struct Conv {
  Tensor<T> weight;
  Tensor<T> bias;
  Conv2dOptions options;
  bool zero_init = false;
  InitKind bias_init = InitKind::zeros;

  Conv() = default;
  Conv(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
       Conv2dOptions opts = {}, bool with_bias = false, bool zero = false)
      : options(opts), zero_init(zero) {
    weight = Tensor<T>::zeros({out_channels, in_channels / opts.groups, kernel, kernel});
    if (with_bias) bias = Tensor<T>::zeros({out_channels});
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, options); }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    const std::size_t fan_in = weight.dim(1) * weight.dim(2) * weight.dim(3);
    v(prefix + ".weight", weight,
      InitSpec{zero_init ? InitKind::zeros : InitKind::fan_in_normal, fan_in});
    if (bias.defined()) v(prefix + ".bias", bias, InitSpec{bias_init, 1});
  }
};

// Transposed convolution with kernel == stride (non-overlapping upsampling).
template <typename T>
struct Deconv {
  Tensor<T> weight;
  std::size_t stride = 2;

  Deconv() = default;
  Deconv(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_and_stride)
      : stride(kernel_and_stride) {
    weight = Tensor<T>::zeros({in_channels, out_channels, kernel_and_stride, kernel_and_stride});
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    return conv_transpose2d(x, weight, Tensor<T>{}, stride);
  }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    // Each output pixel receives exactly one tap from every input channel.
    v(prefix + ".weight", weight, InitSpec{InitKind::fan_in_normal, weight.dim(0)});
  }
};

// Layer normalization over the channel axis of NCHW tensors.
template <typename T>
struct ChannelNorm {
  Tensor<T> gamma;
  Tensor<T> beta;

  ChannelNorm() = default;
  explicit ChannelNorm(std::size_t channels)
      : gamma(Tensor<T>::ones({channels})), beta(Tensor<T>::zeros({channels})) {}

  Tensor<T> operator()(const Tensor<T>& x) const {
    return layer_norm(x, gamma, beta, static_cast<T>(1e-5), 1);
  }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    v(prefix + ".gamma", gamma, InitSpec{InitKind::ones, 1});
    v(prefix + ".beta", beta, InitSpec{InitKind::zeros, 1});
  }
};

// 1x1 expand -> GELU placement per `gelu_after_depthwise` -> 3x3 depthwise -> 1x1 project.
template <typename T>
struct FeedForward {
  Conv<T> expand, depthwise, project;
  bool gelu_after_depthwise = false;

  FeedForward() = default;
  FeedForward(std::size_t channels, std::size_t expansion, bool gelu_after_dw)
      : expand(channels, channels * expansion, 1),
        depthwise(channels * expansion, channels * expansion, 3,
                  {.stride = 1, .padding = 1, .groups = channels * expansion}),
        project(channels * expansion, channels, 1),
        gelu_after_depthwise(gelu_after_dw) {}

  Tensor<T> operator()(const Tensor<T>& x) const {
    if (gelu_after_depthwise) return project(gelu(depthwise(expand(x))));
    return project(depthwise(gelu(expand(x))));
  }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    expand.visit(prefix + ".expand", v);
    depthwise.visit(prefix + ".depthwise", v);
    project.visit(prefix + ".project", v);
  }
};

}  // namespace dlen
