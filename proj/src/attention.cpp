#include "dlen/attention.hpp"

#include "dlen/ops.hpp"

namespace dlen {

template <typename T>
Tensor<T> channel_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                            const Tensor<T>& scale, std::vector<Tensor<T>>* maps) {
  DLEN_REQUIRE(q.rank() == 4, "channel_attention expects NCHW maps");
  DLEN_REQUIRE(k.shape() == q.shape() && v.shape() == q.shape(),
               "channel_attention: q/k/v shapes differ: " + shape_str(q.shape()) + ", " +
                   shape_str(k.shape()) + ", " + shape_str(v.shape()));
  DLEN_REQUIRE(scale.rank() == 1 && scale.numel() > 0, "channel_attention: bad scale shape");
  const std::size_t n = q.dim(0), c = q.dim(1), hw = q.dim(2) * q.dim(3);
  const std::size_t heads = scale.numel();
  DLEN_REQUIRE(c % heads == 0, "channel_attention: " + std::to_string(c) +
                                   " channels not divisible by " + std::to_string(heads) +
                                   " heads");
  for (T s : scale.data()) {
    DLEN_REQUIRE(s != T(0), "channel_attention: attention temperature is zero");
  }
  const std::size_t d = c / heads;
  const Shape tokens{n, heads, d, hw};
  auto qh = l2_normalize(reshape(q, tokens), -1), kh = l2_normalize(reshape(k, tokens), -1);
  auto vh = reshape(v, tokens);
  auto scores = div(matmul(kh, transpose_last2(qh)), reshape(scale, {1, heads, 1, 1}));
  auto attn = softmax(scores, -2);
  if (maps) maps->push_back(attn);
  return reshape(matmul(transpose_last2(attn), vh), q.shape());
}

template Tensor<float> channel_attention(const Tensor<float>&, const Tensor<float>&,
                                         const Tensor<float>&, const Tensor<float>&,
                                         std::vector<Tensor<float>>*);
template Tensor<double> channel_attention(const Tensor<double>&, const Tensor<double>&,
                                          const Tensor<double>&, const Tensor<double>&,
                                          std::vector<Tensor<double>>*);

}  // namespace dlen
