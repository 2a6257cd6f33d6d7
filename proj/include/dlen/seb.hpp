#pragma once

#include <array>
#include <string>
#include <vector>

#include "dlen/layers.hpp"

namespace dlen {

template <typename T>
struct SeabParams {
  ChannelNorm<T> norm1;
  Conv<T> q_point, k_point, v_point;  // 1x1 cross-channel
  Conv<T> q_depth, k_depth, v_depth;  // 3x3 depthwise
  Tensor<T> beta;                     // [heads]
  Conv<T> proj;
  ChannelNorm<T> norm2;
  FeedForward<T> ffn;  // 1x1 -> depthwise 3x3 -> GELU -> 1x1

  SeabParams() = default;
  SeabParams(std::size_t channels, std::size_t heads, std::size_t expansion)
      : norm1(channels),
        q_point(channels, channels, 1),
        k_point(channels, channels, 1),
        v_point(channels, channels, 1),
        q_depth(channels, channels, 3, {.stride = 1, .padding = 1, .groups = channels}),
        k_depth(channels, channels, 3, {.stride = 1, .padding = 1, .groups = channels}),
        v_depth(channels, channels, 3, {.stride = 1, .padding = 1, .groups = channels}),
        beta(Tensor<T>::ones({heads})),
        proj(channels, channels, 1),
        norm2(channels),
        ffn(channels, expansion, true) {}

  std::size_t channels() const { return proj.weight.dim(0); }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    norm1.visit(prefix + ".norm1", v);
    q_point.visit(prefix + ".q_point", v);
    k_point.visit(prefix + ".k_point", v);
    v_point.visit(prefix + ".v_point", v);
    q_depth.visit(prefix + ".q_depth", v);
    k_depth.visit(prefix + ".k_depth", v);
    v_depth.visit(prefix + ".v_depth", v);
    v(prefix + ".beta", beta, InitSpec{InitKind::ones, 1});
    proj.visit(prefix + ".proj", v);
    norm2.visit(prefix + ".norm2", v);
    ffn.visit(prefix + ".ffn", v);
  }
};

template <typename T>
struct SebParams {
  Conv<T> embed;                  // 3 -> Cs
  std::array<std::vector<SeabParams<T>>, 4> enc;  // widths Cs, 2Cs, 4Cs, 8Cs (latent)
  std::array<Conv<T>, 3> down;    // level l -> l + 1, 4x4 stride 2
  std::array<Deconv<T>, 3> up;    // level l + 1 -> l
  std::array<Conv<T>, 2> fuse;    // 1x1 halving after concatenation at levels 1, 2
  std::array<std::vector<SeabParams<T>>, 3> dec;  // widths 2Cs, 2Cs, 4Cs
  std::vector<SeabParams<T>> refine;              // width 2Cs
  Conv<T> exit;                   // 2Cs -> 3, zero-initialized

  SebParams() = default;
  SebParams(std::size_t width, const std::array<std::size_t, 4>& counts,
            const std::array<std::size_t, 4>& heads, std::size_t refine_blocks,
            std::size_t expansion);

  std::size_t width() const { return embed.weight.dim(0); }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    embed.visit(prefix + ".embed", v);
    auto stack = [&](std::vector<SeabParams<T>>& blocks, const std::string& name) {
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].visit(prefix + "." + name + "." + std::to_string(i), v);
      }
    };
    for (std::size_t l = 0; l < 4; ++l) stack(enc[l], "enc" + std::to_string(l));
    for (std::size_t l = 0; l < 3; ++l) {
      down[l].visit(prefix + ".down" + std::to_string(l), v);
      up[l].visit(prefix + ".up" + std::to_string(l), v);
    }
    for (std::size_t l = 0; l < 2; ++l) fuse[l].visit(prefix + ".fuse" + std::to_string(l + 1), v);
    for (std::size_t l = 0; l < 3; ++l) stack(dec[l], "dec" + std::to_string(l));
    stack(refine, "refine");
    exit.visit(prefix + ".exit", v);
  }
};

template <typename T>
struct SebTrace {
  Tensor<T> latent;   // F_l, [N, 8Cs, H/8, W/8]
  Tensor<T> decoded;  // F_d, [N, 2Cs, H, W]
  std::vector<Tensor<T>> attention;
};

// Layer norm, depthwise-enriched Q/K/V, channel attention with per-head temperature,
// projection and residual: T_hat.
template <typename T>
Tensor<T> seab_attention(const Tensor<T>& x, const SeabParams<T>& params,
                         std::vector<Tensor<T>>* maps = nullptr);

// T_hat + FFN(norm2(T_hat) * L_I). An undefined light map skips the gate.
template <typename T>
Tensor<T> seab_forward(const Tensor<T>& x, const Tensor<T>& light, const SeabParams<T>& params,
                       std::vector<Tensor<T>>* maps = nullptr);

// I_lu: [N, 3, H, W] with H, W divisible by 8. Returns I_feb.
template <typename T>
Tensor<T> seb_forward(const Tensor<T>& i_lu, const SebParams<T>& params,
                      SebTrace<T>* trace = nullptr);

}  // namespace dlen
