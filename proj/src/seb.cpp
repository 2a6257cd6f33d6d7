#include "dlen/seb.hpp"

#include "dlen/attention.hpp"

namespace dlen {

namespace {

template <typename T>
std::vector<SeabParams<T>> seab_stack(std::size_t count, std::size_t channels, std::size_t heads,
                                      std::size_t expansion) {
  std::vector<SeabParams<T>> blocks;
  for (std::size_t i = 0; i < count; ++i) blocks.emplace_back(channels, heads, expansion);
  return blocks;
}

template <typename T>
Tensor<T> run_stack(Tensor<T> x, const Tensor<T>& light, const std::vector<SeabParams<T>>& blocks,
                    std::vector<Tensor<T>>* maps) {
  for (const auto& b : blocks) x = seab_forward(x, light, b, maps);
  return x;
}

}  // namespace

template <typename T>
SebParams<T>::SebParams(std::size_t cs, const std::array<std::size_t, 4>& counts,
                        const std::array<std::size_t, 4>& heads, std::size_t refine_blocks,
                        std::size_t expansion)
    : embed(3, cs, 3, {.stride = 1, .padding = 1}, true),
      exit(2 * cs, 3, 3, {.stride = 1, .padding = 1}, true, true) {
  for (std::size_t l = 0; l < 4; ++l) {
    enc[l] = seab_stack<T>(counts[l], cs << l, heads[l], expansion);
  }
  for (std::size_t l = 0; l < 3; ++l) {
    down[l] = Conv<T>(cs << l, cs << (l + 1), 4, {.stride = 2, .padding = 1});
    up[l] = Deconv<T>(cs << (l + 1), cs << l, 2);
  }
  fuse[0] = Conv<T>(4 * cs, 2 * cs, 1);
  fuse[1] = Conv<T>(8 * cs, 4 * cs, 1);
  // Level 0 keeps the concatenated 2Cs width and a single head.
  dec[0] = seab_stack<T>(counts[0], 2 * cs, 1, expansion);
  dec[1] = seab_stack<T>(counts[1], 2 * cs, heads[1], expansion);
  dec[2] = seab_stack<T>(counts[2], 4 * cs, heads[2], expansion);
  refine = seab_stack<T>(refine_blocks, 2 * cs, 1, expansion);
}

template <typename T>
Tensor<T> seab_attention(const Tensor<T>& x, const SeabParams<T>& params,
                         std::vector<Tensor<T>>* maps) {
  DLEN_REQUIRE(x.rank() == 4 && x.dim(1) == params.channels(),
               "seab_attention: input " + shape_str(x.shape()) + " does not match width " +
                   std::to_string(params.channels()));
  auto n = params.norm1(x);
  auto q = params.q_depth(params.q_point(n));
  auto k = params.k_depth(params.k_point(n));
  auto v = params.v_depth(params.v_point(n));
  return x + params.proj(channel_attention(q, k, v, params.beta, maps));
}

template <typename T>
Tensor<T> seab_forward(const Tensor<T>& x, const Tensor<T>& light, const SeabParams<T>& params,
                       std::vector<Tensor<T>>* maps) {
  auto t_hat = seab_attention(x, params, maps);
  auto gated = params.norm2(t_hat);
  if (light.defined()) {
    DLEN_REQUIRE(light.shape() == Shape({x.dim(0), 1, x.dim(2), x.dim(3)}),
                 "seab_forward: light map " + shape_str(light.shape()) + " does not match " +
                     shape_str(x.shape()));
    gated = gated * light;
  }
  return t_hat + params.ffn(gated);
}

template <typename T>
Tensor<T> seb_forward(const Tensor<T>& i_lu, const SebParams<T>& params, SebTrace<T>* trace) {
  DLEN_REQUIRE(i_lu.rank() == 4 && i_lu.dim(1) == 3, "seb_forward expects [N, 3, H, W] input");
  DLEN_REQUIRE(i_lu.dim(2) % 8 == 0 && i_lu.dim(3) % 8 == 0,
               "seb_forward needs H, W divisible by 8, got " + shape_str(i_lu.shape()));
  auto* maps = trace ? &trace->attention : nullptr;
  std::array<Tensor<T>, 4> light;
  light[0] = reduce_mean(i_lu, {1}, true);
  for (std::size_t l = 1; l < 4; ++l) light[l] = avg_pool2d(light[0], std::size_t{1} << l);

  std::array<Tensor<T>, 4> skip;
  auto x = params.embed(i_lu);
  for (std::size_t l = 0; l < 4; ++l) {
    if (l > 0) x = params.down[l - 1](x);
    skip[l] = x = run_stack(x, light[l], params.enc[l], maps);
  }
  if (trace) trace->latent = x;
  for (std::size_t l = 3; l-- > 0;) {
    x = concat<T>({params.up[l](x), skip[l]}, 1);
    if (l > 0) x = params.fuse[l - 1](x);
    x = run_stack(x, light[l], params.dec[l], maps);
  }
  if (trace) trace->decoded = x;
  x = run_stack(x, light[0], params.refine, maps);
  return params.exit(x);
}

#define DLEN_INSTANTIATE(T)                                                                  \
  template struct SebParams<T>;                                                              \
  template Tensor<T> seab_attention(const Tensor<T>&, const SeabParams<T>&,                  \
                                    std::vector<Tensor<T>>*);                                \
  template Tensor<T> seab_forward(const Tensor<T>&, const Tensor<T>&, const SeabParams<T>&,  \
                                  std::vector<Tensor<T>>*);                                  \
  template Tensor<T> seb_forward(const Tensor<T>&, const SebParams<T>&, SebTrace<T>*);

DLEN_INSTANTIATE(float)
DLEN_INSTANTIATE(double)

}  // namespace dlen
