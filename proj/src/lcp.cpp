#include "dlen/lcp.hpp"

namespace dlen {

template <typename T>
Tensor<T> illumination_prior(const Tensor<T>& image) {
  DLEN_REQUIRE(image.rank() == 4 && image.dim(1) == 3,
               "illumination_prior expects [N, 3, H, W], got " + shape_str(image.shape()));
  return reduce_mean(image, {1}, true);
}

template <typename T>
LcpOutput<T> lcp_forward(const Tensor<T>& image, const Tensor<T>& prior,
                         const LcpParams<T>& params) {
  DLEN_REQUIRE(image.rank() == 4 && image.dim(1) == 3,
               "lcp_forward expects [N, 3, H, W], got " + shape_str(image.shape()));
  const Shape want{image.dim(0), 1, image.dim(2), image.dim(3)};
  DLEN_REQUIRE(prior.shape() == want, "lcp_forward: prior shape " + shape_str(prior.shape()) +
                                          " does not match " + shape_str(want));
  LcpOutput<T> out;
  out.f_lu = params.depthwise(params.embed(concat<T>({image, prior}, 1)));
  out.l_tilde = params.light(out.f_lu);
  out.i_lu = image * out.l_tilde;
  return out;
}

template Tensor<float> illumination_prior(const Tensor<float>&);
template Tensor<double> illumination_prior(const Tensor<double>&);
template LcpOutput<float> lcp_forward(const Tensor<float>&, const Tensor<float>&,
                                      const LcpParams<float>&);
template LcpOutput<double> lcp_forward(const Tensor<double>&, const Tensor<double>&,
                                       const LcpParams<double>&);

}  // namespace dlen
