#include "dlen/wavelet.hpp"

#include <cmath>

namespace dlen {

template <typename T>
WaveletFilterPair<T> WaveletFilterPair<T>::haar() {
  const T r = static_cast<T>(1.0 / std::sqrt(2.0));
  return {Tensor<T>::from_data({2}, {r, r}), Tensor<T>::from_data({2}, {r, -r})};
}

template <typename T>
std::array<Tensor<T>, 4> build_subband_kernels(const WaveletFilterPair<T>& filters) {
  DLEN_REQUIRE(filters.h0.shape() == Shape{2} && filters.h1.shape() == Shape{2},
               "wavelet taps must have length 2");
  check_finite(filters.h0.data(), "wavelet h0");
  check_finite(filters.h1.data(), "wavelet h1");
  const Tensor<T> col[2] = {reshape(filters.h0, {2, 1}), reshape(filters.h1, {2, 1})};
  const Tensor<T> row[2] = {reshape(filters.h0, {1, 2}), reshape(filters.h1, {1, 2})};
  return {matmul(col[0], row[0]), matmul(col[0], row[1]), matmul(col[1], row[0]),
          matmul(col[1], row[1])};
}

template <typename T>
Tensor<T> subband_weight(const WaveletFilterPair<T>& filters) {
  auto k = build_subband_kernels(filters);
  std::vector<Tensor<T>> parts;
  for (auto& g : k) parts.push_back(reshape(g, {1, 1, 2, 2}));
  return concat(parts, 0);
}

template <typename T>
SubbandTensor<T> dwt2d(const Tensor<T>& x, const WaveletFilterPair<T>& filters) {
  DLEN_REQUIRE(x.rank() == 4, "dwt2d expects NCHW input");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  DLEN_REQUIRE(h % 2 == 0 && w % 2 == 0, "dwt2d needs even spatial extents, got " +
                                             shape_str(x.shape()));
  auto bands = conv2d(reshape(x, {n * c, 1, h, w}), subband_weight(filters), Tensor<T>{},
                      {.stride = 2});
  const Shape out{n, c, h / 2, w / 2};
  SubbandTensor<T> s;
  s.ll = reshape(slice(bands, 1, 0, 1), out);
  s.lh = reshape(slice(bands, 1, 1, 1), out);
  s.hl = reshape(slice(bands, 1, 2, 1), out);
  s.hh = reshape(slice(bands, 1, 3, 1), out);
  s.source_height = h;
  s.source_width = w;
  return s;
}

template <typename T>
Tensor<T> idwt2d(const SubbandTensor<T>& sub, const WaveletFilterPair<T>& filters) {
  const Shape& shape = sub.ll.shape();
  DLEN_REQUIRE(shape.size() == 4, "idwt2d expects NCHW subbands");
  DLEN_REQUIRE(sub.lh.shape() == shape && sub.hl.shape() == shape && sub.hh.shape() == shape,
               "idwt2d: subband shapes differ");
  const std::size_t n = shape[0], c = shape[1], h = shape[2], w = shape[3];
  const Shape flat{n * c, 1, h, w};
  auto stack = concat<T>({reshape(sub.ll, flat), reshape(sub.lh, flat), reshape(sub.hl, flat),
                          reshape(sub.hh, flat)},
                         1);
  auto out = conv_transpose2d(stack, subband_weight(filters), Tensor<T>{}, 2);
  return reshape(out, {n, c, 2 * h, 2 * w});
}

template <typename T>
Tensor<T> lwn_forward(const Tensor<T>& f_lu, const LwnParams<T>& params) {
  DLEN_REQUIRE(f_lu.rank() == 4, "lwn_forward expects NCHW input");
  const std::size_t c = f_lu.dim(1), h = f_lu.dim(2), w = f_lu.dim(3);
  DLEN_REQUIRE(c == params.channels(), "lwn_forward: input has " + std::to_string(c) +
                                           " channels, parameters expect " +
                                           std::to_string(params.channels()));
  DLEN_REQUIRE(h >= 2 && w >= 2, "lwn_forward needs H, W >= 2");
  Tensor<T> x = f_lu;
  if (h % 2 || w % 2) x = pad_reflect(f_lu, 0, h % 2, 0, w % 2);

  auto sub = dwt2d(x, params.filters);
  auto stack = concat<T>({sub.ll, sub.lh, sub.hl, sub.hh}, 1);
  auto processed = stack + params.process2(gelu(params.process1(stack)));
  sub.ll = slice(processed, 1, 0, c);
  sub.lh = slice(processed, 1, c, c);
  sub.hl = slice(processed, 1, 2 * c, c);
  sub.hh = slice(processed, 1, 3 * c, c);
  auto out = idwt2d(sub, params.filters);
  if (h % 2) out = slice(out, 2, 0, h);
  if (w % 2) out = slice(out, 3, 0, w);
  return out;
}

#define DLEN_INSTANTIATE(T)                                                                  \
  template struct WaveletFilterPair<T>;                                                      \
  template std::array<Tensor<T>, 4> build_subband_kernels(const WaveletFilterPair<T>&);      \
  template Tensor<T> subband_weight(const WaveletFilterPair<T>&);                            \
  template SubbandTensor<T> dwt2d(const Tensor<T>&, const WaveletFilterPair<T>&);            \
  template Tensor<T> idwt2d(const SubbandTensor<T>&, const WaveletFilterPair<T>&);           \
  template Tensor<T> lwn_forward(const Tensor<T>&, const LwnParams<T>&);

DLEN_INSTANTIATE(float)
DLEN_INSTANTIATE(double)

}  // namespace dlen
