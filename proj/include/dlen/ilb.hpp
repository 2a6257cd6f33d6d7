#pragma once

#include <array>
#include <string>
#include <vector>

#include "dlen/layers.hpp"

namespace dlen {

template <typename T>
struct MiabParams {
  ChannelNorm<T> norm1;
  Conv<T> wq, wk, wv;  // per-head d x d maps as grouped 1x1 convolutions
  Tensor<T> alpha;     // [heads]
  Conv<T> proj;
  Tensor<T> pos;       // [1, C, H_train, W_train] at this block's scale
  ChannelNorm<T> norm2;
  FeedForward<T> ffn;

  MiabParams() = default;
  MiabParams(std::size_t channels, std::size_t heads, std::size_t expansion,
             std::size_t pos_height, std::size_t pos_width)
      : norm1(channels),
        wq(channels, channels, 1, {.groups = heads}),
        wk(channels, channels, 1, {.groups = heads}),
        wv(channels, channels, 1, {.groups = heads}),
        alpha(Tensor<T>::ones({heads})),
        proj(channels, channels, 1),
        pos(Tensor<T>::zeros({1, channels, pos_height, pos_width})),
        norm2(channels),
        ffn(channels, expansion, false) {}

  std::size_t channels() const { return proj.weight.dim(0); }
  std::size_t heads() const { return alpha.numel(); }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    norm1.visit(prefix + ".norm1", v);
    wq.visit(prefix + ".wq", v);
    wk.visit(prefix + ".wk", v);
    wv.visit(prefix + ".wv", v);
    v(prefix + ".alpha", alpha, InitSpec{InitKind::ones, 1});
    proj.visit(prefix + ".proj", v);
    v(prefix + ".pos", pos, InitSpec{InitKind::zeros, 1});
    norm2.visit(prefix + ".norm2", v);
    ffn.visit(prefix + ".ffn", v);
  }
};

template <typename T>
struct IlbParams {
  Conv<T> entry;
  std::array<Conv<T>, 2> down;     // feature downsampling, 4x4 stride 2
  std::array<Conv<T>, 2> lu_down;  // F_lu downsampling, 4x4 stride 2
  std::vector<MiabParams<T>> enc0, enc1, bottleneck, dec1, dec0;
  std::array<Deconv<T>, 2> up;     // up[0]: 2C -> C, up[1]: 4C -> 2C
  std::array<Conv<T>, 2> fuse;     // 1x1 after skip concatenation
  Conv<T> exit;

  IlbParams() = default;
  // counts = {level 0, level 1, bottleneck}; heads likewise.
  IlbParams(std::size_t channels, const std::array<std::size_t, 3>& counts,
            const std::array<std::size_t, 3>& heads, std::size_t expansion,
            std::size_t train_height, std::size_t train_width);

  std::size_t channels() const { return entry.weight.dim(0); }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    entry.visit(prefix + ".entry", v);
    for (std::size_t i = 0; i < 2; ++i) {
      down[i].visit(prefix + ".down" + std::to_string(i), v);
      lu_down[i].visit(prefix + ".lu_down" + std::to_string(i), v);
    }
    auto stack = [&](std::vector<MiabParams<T>>& blocks, const std::string& name) {
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].visit(prefix + "." + name + "." + std::to_string(i), v);
      }
    };
    stack(enc0, "enc0");
    stack(enc1, "enc1");
    stack(bottleneck, "bottleneck");
    for (std::size_t i = 0; i < 2; ++i) {
      up[i].visit(prefix + ".up" + std::to_string(i), v);
      fuse[i].visit(prefix + ".fuse" + std::to_string(i), v);
    }
    stack(dec1, "dec1");
    stack(dec0, "dec0");
    exit.visit(prefix + ".exit", v);
  }
};

// Per-head attention gated by the light feature, before the output projection.
// x_norm, y: [N, C, H, W]. Returns the concatenated head outputs [N, C, H, W].
template <typename T>
Tensor<T> ig_attention_heads(const Tensor<T>& x_norm, const Tensor<T>& y,
                             const MiabParams<T>& params,
                             std::vector<Tensor<T>>* maps = nullptr);

// Head outputs projected and offset by the positional encoding (resized when the
// spatial size differs from the one it was trained at).
template <typename T>
Tensor<T> ig_attention(const Tensor<T>& x_norm, const Tensor<T>& y, const MiabParams<T>& params,
                       std::vector<Tensor<T>>* maps = nullptr);

template <typename T>
Tensor<T> miab_forward(const Tensor<T>& f_in, const Tensor<T>& f_lu_scaled,
                       const MiabParams<T>& params, std::vector<Tensor<T>>* maps = nullptr);

// I_lu: [N, 3, H, W], F_lu: [N, C, H, W], H and W divisible by 4. Returns I_flb.
template <typename T>
Tensor<T> ilb_forward(const Tensor<T>& i_lu, const Tensor<T>& f_lu, const IlbParams<T>& params,
                      std::vector<Tensor<T>>* maps = nullptr);

}  // namespace dlen
