#include "dlen/ilb.hpp"

#include "dlen/attention.hpp"

namespace dlen {

namespace {

constexpr Conv2dOptions kDown{.stride = 2, .padding = 1};

template <typename T>
std::vector<MiabParams<T>> miab_stack(std::size_t count, std::size_t channels, std::size_t heads,
                                      std::size_t expansion, std::size_t h, std::size_t w) {
  std::vector<MiabParams<T>> blocks;
  for (std::size_t i = 0; i < count; ++i) blocks.emplace_back(channels, heads, expansion, h, w);
  return blocks;
}

template <typename T>
Tensor<T> run_stack(Tensor<T> x, const Tensor<T>& y, const std::vector<MiabParams<T>>& blocks,
                    std::vector<Tensor<T>>* maps) {
  for (const auto& b : blocks) x = miab_forward(x, y, b, maps);
  return x;
}

}  // namespace

template <typename T>
IlbParams<T>::IlbParams(std::size_t c, const std::array<std::size_t, 3>& counts,
                        const std::array<std::size_t, 3>& heads, std::size_t expansion,
                        std::size_t th, std::size_t tw)
    : entry(3, c, 3, {.stride = 1, .padding = 1}, true),
      down{Conv<T>(c, 2 * c, 4, kDown), Conv<T>(2 * c, 4 * c, 4, kDown)},
      lu_down{Conv<T>(c, 2 * c, 4, kDown), Conv<T>(2 * c, 4 * c, 4, kDown)},
      enc0(miab_stack<T>(counts[0], c, heads[0], expansion, th, tw)),
      enc1(miab_stack<T>(counts[1], 2 * c, heads[1], expansion, th / 2, tw / 2)),
      bottleneck(miab_stack<T>(counts[2], 4 * c, heads[2], expansion, th / 4, tw / 4)),
      dec1(miab_stack<T>(counts[1], 2 * c, heads[1], expansion, th / 2, tw / 2)),
      dec0(miab_stack<T>(counts[0], c, heads[0], expansion, th, tw)),
      up{Deconv<T>(2 * c, c, 2), Deconv<T>(4 * c, 2 * c, 2)},
      fuse{Conv<T>(2 * c, c, 1), Conv<T>(4 * c, 2 * c, 1)},
      exit(c, 3, 3, {.stride = 1, .padding = 1}, true, true) {}

template <typename T>
Tensor<T> ig_attention_heads(const Tensor<T>& x_norm, const Tensor<T>& y,
                             const MiabParams<T>& params, std::vector<Tensor<T>>* maps) {
  DLEN_REQUIRE(x_norm.rank() == 4 && x_norm.shape() == y.shape(),
               "ig_attention: feature " + shape_str(x_norm.shape()) + " and light " +
                   shape_str(y.shape()) + " shapes differ");
  DLEN_REQUIRE(x_norm.dim(1) == params.channels(),
               "ig_attention: input has " + std::to_string(x_norm.dim(1)) +
                   " channels, parameters expect " + std::to_string(params.channels()));
  return channel_attention(params.wq(x_norm), params.wk(x_norm), y * params.wv(x_norm),
                           params.alpha, maps);
}

template <typename T>
Tensor<T> ig_attention(const Tensor<T>& x_norm, const Tensor<T>& y, const MiabParams<T>& params,
                       std::vector<Tensor<T>>* maps) {
  auto out = params.proj(ig_attention_heads(x_norm, y, params, maps));
  Tensor<T> pos = params.pos;
  if (pos.dim(2) != out.dim(2) || pos.dim(3) != out.dim(3)) {
    pos = resize_bilinear(pos, out.dim(2), out.dim(3));
  }
  return out + pos;
}

template <typename T>
Tensor<T> miab_forward(const Tensor<T>& f_in, const Tensor<T>& f_lu_scaled,
                       const MiabParams<T>& params, std::vector<Tensor<T>>* maps) {
  DLEN_REQUIRE(f_in.shape() == f_lu_scaled.shape(),
               "miab_forward: feature " + shape_str(f_in.shape()) + " and light " +
                   shape_str(f_lu_scaled.shape()) + " shapes differ");
  auto x = f_in + ig_attention(params.norm1(f_in), f_lu_scaled, params, maps);
  return x + params.ffn(params.norm2(x));
}

template <typename T>
Tensor<T> ilb_forward(const Tensor<T>& i_lu, const Tensor<T>& f_lu, const IlbParams<T>& params,
                      std::vector<Tensor<T>>* maps) {
  DLEN_REQUIRE(i_lu.rank() == 4 && i_lu.dim(1) == 3, "ilb_forward expects [N, 3, H, W] input");
  const std::size_t h = i_lu.dim(2), w = i_lu.dim(3);
  DLEN_REQUIRE(h % 4 == 0 && w % 4 == 0,
               "ilb_forward needs H, W divisible by 4, got " + shape_str(i_lu.shape()));
  DLEN_REQUIRE(f_lu.shape() == Shape({i_lu.dim(0), params.channels(), h, w}),
               "ilb_forward: light feature shape " + shape_str(f_lu.shape()) + " mismatch");
  const Tensor<T> y0 = f_lu;
  const auto y1 = params.lu_down[0](y0);
  const auto y2 = params.lu_down[1](y1);

  auto e0 = run_stack(params.entry(i_lu), y0, params.enc0, maps);
  auto e1 = run_stack(params.down[0](e0), y1, params.enc1, maps);
  auto b = run_stack(params.down[1](e1), y2, params.bottleneck, maps);
  auto d1 = params.fuse[1](concat<T>({params.up[1](b), e1}, 1));
  d1 = run_stack(d1, y1, params.dec1, maps);
  auto d0 = params.fuse[0](concat<T>({params.up[0](d1), e0}, 1));
  d0 = run_stack(d0, y0, params.dec0, maps);
  return params.exit(d0);
}

#define DLEN_INSTANTIATE(T)                                                                   \
  template struct IlbParams<T>;                                                               \
  template Tensor<T> ig_attention_heads(const Tensor<T>&, const Tensor<T>&,                   \
                                        const MiabParams<T>&, std::vector<Tensor<T>>*);       \
  template Tensor<T> ig_attention(const Tensor<T>&, const Tensor<T>&, const MiabParams<T>&,   \
                                  std::vector<Tensor<T>>*);                                   \
  template Tensor<T> miab_forward(const Tensor<T>&, const Tensor<T>&, const MiabParams<T>&,   \
                                  std::vector<Tensor<T>>*);                                   \
  template Tensor<T> ilb_forward(const Tensor<T>&, const Tensor<T>&, const IlbParams<T>&,     \
                                 std::vector<Tensor<T>>*);

DLEN_INSTANTIATE(float)
DLEN_INSTANTIATE(double)

}  // namespace dlen
