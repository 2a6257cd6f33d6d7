#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "dlen/layers.hpp"

namespace dlen {

// Learnable two-tap analysis filters. Synthesis reuses the same taps.
template <typename T>
struct WaveletFilterPair {
  Tensor<T> h0;  // low-pass
  Tensor<T> h1;  // high-pass

  static WaveletFilterPair haar();

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    v(prefix + ".h0", h0, InitSpec{InitKind::haar_low, 1});
    v(prefix + ".h1", h1, InitSpec{InitKind::haar_high, 1});
  }
};

template <typename T>
struct SubbandTensor {
  Tensor<T> ll, lh, hl, hh;
  std::size_t source_height = 0;
  std::size_t source_width = 0;
};

// G_ab[i][j] = h_a[i] * h_b[j], in the order ll, lh, hl, hh.
template <typename T>
std::array<Tensor<T>, 4> build_subband_kernels(const WaveletFilterPair<T>& filters);

// The four kernels stacked as a [4, 1, 2, 2] convolution weight.
template <typename T>
Tensor<T> subband_weight(const WaveletFilterPair<T>& filters);

template <typename T>
SubbandTensor<T> dwt2d(const Tensor<T>& x, const WaveletFilterPair<T>& filters);

template <typename T>
Tensor<T> idwt2d(const SubbandTensor<T>& sub, const WaveletFilterPair<T>& filters);

template <typename T>
struct LwnParams {
  WaveletFilterPair<T> filters;
  Conv<T> process1;
  Conv<T> process2;  // zero-initialized: the block starts as an exact identity

  LwnParams() = default;
  explicit LwnParams(std::size_t channels)
      : filters(WaveletFilterPair<T>::haar()),
        process1(4 * channels, 4 * channels, 3, {.stride = 1, .padding = 1}, true),
        process2(4 * channels, 4 * channels, 3, {.stride = 1, .padding = 1}, true, true) {}

  std::size_t channels() const { return process1.weight.dim(0) / 4; }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    filters.visit(prefix + ".filters", v);
    process1.visit(prefix + ".process1", v);
    process2.visit(prefix + ".process2", v);
  }
};

// Reflect-pads odd extents, processes the concatenated subband stack with a residual
// conv-GELU-conv delta, reconstructs and crops back to the input size.
template <typename T>
Tensor<T> lwn_forward(const Tensor<T>& f_lu, const LwnParams<T>& params);

}  // namespace dlen
