#pragma once

#include <string>

#include "dlen/layers.hpp"

namespace dlen {

template <typename T>
struct LcpOutput {
  Tensor<T> i_lu;     // [N, 3, H, W] lit image
  Tensor<T> f_lu;     // [N, C, H, W] light-up feature
  Tensor<T> l_tilde;  // [N, 3, H, W] brightening map, unclamped
};

template <typename T>
struct LcpParams {
  Conv<T> embed;      // 1x1, 4 -> C
  Conv<T> depthwise;  // 5x5 depthwise, produces F_lu
  Conv<T> light;      // 1x1, C -> 3, starts at constant 1

  LcpParams() = default;
  explicit LcpParams(std::size_t channels)
      : embed(4, channels, 1, {}, true),
        depthwise(channels, channels, 5, {.stride = 1, .padding = 2, .groups = channels}, true),
        light(channels, 3, 1, {}, true, true) {
    light.bias_init = InitKind::ones;
  }

  std::size_t channels() const { return embed.weight.dim(0); }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    embed.visit(prefix + ".embed", v);
    depthwise.visit(prefix + ".depthwise", v);
    light.visit(prefix + ".light", v);
  }
};

// Per-pixel mean over the three color channels: [N, 3, H, W] -> [N, 1, H, W].
template <typename T>
Tensor<T> illumination_prior(const Tensor<T>& image);

template <typename T>
LcpOutput<T> lcp_forward(const Tensor<T>& image, const Tensor<T>& prior,
                         const LcpParams<T>& params);

}  // namespace dlen
