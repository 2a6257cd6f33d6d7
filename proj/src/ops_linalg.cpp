#include <algorithm>
#include <cstddef>

#include "dlen/ops.hpp"
#include "dlen/parallel.hpp"

namespace dlen {

namespace {

using Index = std::ptrdiff_t;

// Dot product with eight independent partial sums so the loop vectorizes without
// reassociation flags. The summation order is fixed, hence deterministic.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T part[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int k = 0; k < 8; ++k) part[k] += a[i + k] * b[i + k];
  }
  T r = ((part[0] + part[1]) + (part[2] + part[3])) + ((part[4] + part[5]) + (part[6] + part[7]));
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

template <typename T>
T dot_strided(const T* a, const T* b, std::size_t n, std::size_t b_stride) {
  T r = T(0);
  for (std::size_t i = 0; i < n; ++i) r += a[i] * b[i * b_stride];
  return r;
}

// Output columns [lo, hi) whose input column ox * stride + k - pad lies inside [0, in).
struct ColRange {
  Index lo, hi;
};

ColRange valid_cols(Index out, Index in, Index stride, Index k, Index pad) {
  Index lo = 0;
  if (pad > k) lo = (pad - k + stride - 1) / stride;
  Index hi = (in - 1 + pad - k) >= 0 ? (in - 1 + pad - k) / stride + 1 : 0;
  hi = std::min(hi, out);
  return {lo, std::max(lo, hi)};
}

struct ConvGeometry {
  std::size_t n, cin, h, w;
  std::size_t cout, cin_g, kh, kw;
  std::size_t cout_g, groups, stride, pad;
  std::size_t ho, wo;
};

template <typename T>
void conv_forward(const ConvGeometry& g, const T* x, const T* wt, const T* bias, T* out) {
  const Index s = static_cast<Index>(g.stride), p = static_cast<Index>(g.pad);
  parallel_for(g.n * g.cout, [&](std::size_t begin, std::size_t end) {
    for (std::size_t plane = begin; plane < end; ++plane) {
      const std::size_t n = plane / g.cout, oc = plane % g.cout;
      const std::size_t grp = oc / g.cout_g;
      T* o = out + plane * g.ho * g.wo;
      std::fill(o, o + g.ho * g.wo, bias ? bias[oc] : T(0));
      for (std::size_t icg = 0; icg < g.cin_g; ++icg) {
        const std::size_t ic = grp * g.cin_g + icg;
        const T* xin = x + (n * g.cin + ic) * g.h * g.w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const T wv = wt[((oc * g.cin_g + icg) * g.kh + ky) * g.kw + kx];
            if (wv == T(0)) continue;
            const ColRange cr = valid_cols(static_cast<Index>(g.wo), static_cast<Index>(g.w), s,
                                           static_cast<Index>(kx), p);
            for (std::size_t oy = 0; oy < g.ho; ++oy) {
              const Index iy = static_cast<Index>(oy) * s + static_cast<Index>(ky) - p;
              if (iy < 0 || iy >= static_cast<Index>(g.h)) continue;
              T* orow = o + oy * g.wo;
              const T* irow = xin + iy * static_cast<Index>(g.w);
              if (s == 1) {
                const T* src = irow + static_cast<Index>(kx) - p;
                for (Index ox = cr.lo; ox < cr.hi; ++ox) orow[ox] += wv * src[ox];
              } else {
                for (Index ox = cr.lo; ox < cr.hi; ++ox) {
                  orow[ox] += wv * irow[ox * s + static_cast<Index>(kx) - p];
                }
              }
            }
          }
        }
      }
    }
  });
}

template <typename T>
void conv_backward_input(const ConvGeometry& g, const T* gout, const T* wt, T* gx) {
  const Index s = static_cast<Index>(g.stride), p = static_cast<Index>(g.pad);
  parallel_for(g.n * g.cin, [&](std::size_t begin, std::size_t end) {
    for (std::size_t plane = begin; plane < end; ++plane) {
      const std::size_t n = plane / g.cin, ic = plane % g.cin;
      const std::size_t grp = ic / g.cin_g, icg = ic % g.cin_g;
      T* gi = gx + plane * g.h * g.w;
      for (std::size_t oc = grp * g.cout_g; oc < (grp + 1) * g.cout_g; ++oc) {
        const T* go = gout + (n * g.cout + oc) * g.ho * g.wo;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const T wv = wt[((oc * g.cin_g + icg) * g.kh + ky) * g.kw + kx];
            if (wv == T(0)) continue;
            const ColRange cr = valid_cols(static_cast<Index>(g.wo), static_cast<Index>(g.w), s,
                                           static_cast<Index>(kx), p);
            for (std::size_t oy = 0; oy < g.ho; ++oy) {
              const Index iy = static_cast<Index>(oy) * s + static_cast<Index>(ky) - p;
              if (iy < 0 || iy >= static_cast<Index>(g.h)) continue;
              const T* gorow = go + oy * g.wo;
              T* girow = gi + iy * static_cast<Index>(g.w);
              if (s == 1) {
                T* dst = girow + static_cast<Index>(kx) - p;
                for (Index ox = cr.lo; ox < cr.hi; ++ox) dst[ox] += wv * gorow[ox];
              } else {
                for (Index ox = cr.lo; ox < cr.hi; ++ox) {
                  girow[ox * s + static_cast<Index>(kx) - p] += wv * gorow[ox];
                }
              }
            }
          }
        }
      }
    }
  });
}

template <typename T>
void conv_backward_weight(const ConvGeometry& g, const T* gout, const T* x, T* gw) {
  const Index s = static_cast<Index>(g.stride), p = static_cast<Index>(g.pad);
  parallel_for(g.cout, [&](std::size_t begin, std::size_t end) {
    for (std::size_t oc = begin; oc < end; ++oc) {
      const std::size_t grp = oc / g.cout_g;
      for (std::size_t icg = 0; icg < g.cin_g; ++icg) {
        const std::size_t ic = grp * g.cin_g + icg;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const ColRange cr = valid_cols(static_cast<Index>(g.wo), static_cast<Index>(g.w), s,
                                           static_cast<Index>(kx), p);
            if (cr.hi <= cr.lo) continue;
            T acc = T(0);
            for (std::size_t n = 0; n < g.n; ++n) {
              const T* go = gout + (n * g.cout + oc) * g.ho * g.wo;
              const T* xin = x + (n * g.cin + ic) * g.h * g.w;
              for (std::size_t oy = 0; oy < g.ho; ++oy) {
                const Index iy = static_cast<Index>(oy) * s + static_cast<Index>(ky) - p;
                if (iy < 0 || iy >= static_cast<Index>(g.h)) continue;
                const T* gorow = go + oy * g.wo + cr.lo;
                const T* irow = xin + iy * static_cast<Index>(g.w) + cr.lo * s +
                                static_cast<Index>(kx) - p;
                const auto len = static_cast<std::size_t>(cr.hi - cr.lo);
                acc += s == 1 ? dot(gorow, irow, len)
                              : dot_strided(gorow, irow, len, static_cast<std::size_t>(s));
              }
            }
            gw[((oc * g.cin_g + icg) * g.kh + ky) * g.kw + kx] += acc;
          }
        }
      }
    }
  });
}

template <typename T>
void accumulate_bias_grad(std::size_t n, std::size_t channels, std::size_t plane_size,
                          const T* gout, T* gb) {
  for (std::size_t c = 0; c < channels; ++c) {
    T acc = T(0);
    for (std::size_t b = 0; b < n; ++b) {
      const T* go = gout + (b * channels + c) * plane_size;
      for (std::size_t i = 0; i < plane_size; ++i) acc += go[i];
    }
    gb[c] += acc;
  }
}

template <typename T>
void check_bias(const Tensor<T>& bias, std::size_t channels, const char* op) {
  if (bias.defined() && bias.shape() != Shape{channels}) {
    throw ContractError(std::string(op) + ": bias must have shape [" + std::to_string(channels) +
                        "], got " + shape_str(bias.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions options) {
  if (x.rank() != 4 || weight.rank() != 4) {
    throw ContractError("conv2d: expected 4-D input and weight, got " + shape_str(x.shape()) +
                        " and " + shape_str(weight.shape()));
  }
  DLEN_REQUIRE(options.stride >= 1 && options.groups >= 1, "conv2d: stride and groups must be >= 1");
  ConvGeometry g{};
  g.n = x.dim(0), g.cin = x.dim(1), g.h = x.dim(2), g.w = x.dim(3);
  g.cout = weight.dim(0), g.cin_g = weight.dim(1), g.kh = weight.dim(2), g.kw = weight.dim(3);
  g.groups = options.groups, g.stride = options.stride, g.pad = options.padding;
  if (g.cin % g.groups != 0 || g.cout % g.groups != 0 || g.cin / g.groups != g.cin_g) {
    throw ContractError("conv2d: input " + shape_str(x.shape()) + " / weight " +
                        shape_str(weight.shape()) + " incompatible with groups=" +
                        std::to_string(g.groups));
  }
  if (g.h + 2 * g.pad < g.kh || g.w + 2 * g.pad < g.kw) {
    throw ContractError("conv2d: padded input smaller than kernel");
  }
  check_bias(bias, g.cout, "conv2d");
  check_finite(x.data(), "conv2d input");
  g.cout_g = g.cout / g.groups;
  g.ho = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.kw) / g.stride + 1;

  std::vector<T> out(g.n * g.cout * g.ho * g.wo);
  conv_forward(g, x.data().data(), weight.data().data(),
               bias.defined() ? bias.data().data() : nullptr, out.data());
  std::vector<Tensor<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(Shape{g.n, g.cout, g.ho, g.wo}, std::move(out), "conv2d", inputs,
                        [g](TensorImpl<T>& o) {
                          auto& xi = *o.node->inputs[0];
                          auto& wi = *o.node->inputs[1];
                          if (xi.requires_grad) {
                            conv_backward_input(g, o.grad.data(), wi.data.data(),
                                                xi.grad_buffer().data());
                          }
                          if (wi.requires_grad) {
                            conv_backward_weight(g, o.grad.data(), xi.data.data(),
                                                 wi.grad_buffer().data());
                          }
                          if (o.node->inputs.size() > 2 && o.node->inputs[2]->requires_grad) {
                            accumulate_bias_grad(g.n, g.cout, g.ho * g.wo, o.grad.data(),
                                                 o.node->inputs[2]->grad_buffer().data());
                          }
                        });
}

namespace {

struct DeconvGeometry {
  std::size_t n, cin, h, w, cout, kh, kw, stride, ho, wo;
};

template <typename T>
void deconv_forward(const DeconvGeometry& g, const T* x, const T* wt, const T* bias, T* out) {
  parallel_for(g.n * g.cout, [&](std::size_t begin, std::size_t end) {
    for (std::size_t plane = begin; plane < end; ++plane) {
      const std::size_t n = plane / g.cout, oc = plane % g.cout;
      T* o = out + plane * g.ho * g.wo;
      std::fill(o, o + g.ho * g.wo, bias ? bias[oc] : T(0));
      for (std::size_t ic = 0; ic < g.cin; ++ic) {
        const T* xin = x + (n * g.cin + ic) * g.h * g.w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const T wv = wt[((ic * g.cout + oc) * g.kh + ky) * g.kw + kx];
            if (wv == T(0)) continue;
            for (std::size_t iy = 0; iy < g.h; ++iy) {
              T* orow = o + (iy * g.stride + ky) * g.wo + kx;
              const T* irow = xin + iy * g.w;
              for (std::size_t ix = 0; ix < g.w; ++ix) orow[ix * g.stride] += wv * irow[ix];
            }
          }
        }
      }
    }
  });
}

template <typename T>
void deconv_backward_input(const DeconvGeometry& g, const T* gout, const T* wt, T* gx) {
  parallel_for(g.n * g.cin, [&](std::size_t begin, std::size_t end) {
    for (std::size_t plane = begin; plane < end; ++plane) {
      const std::size_t n = plane / g.cin, ic = plane % g.cin;
      T* gi = gx + plane * g.h * g.w;
      for (std::size_t oc = 0; oc < g.cout; ++oc) {
        const T* go = gout + (n * g.cout + oc) * g.ho * g.wo;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const T wv = wt[((ic * g.cout + oc) * g.kh + ky) * g.kw + kx];
            if (wv == T(0)) continue;
            for (std::size_t iy = 0; iy < g.h; ++iy) {
              const T* gorow = go + (iy * g.stride + ky) * g.wo + kx;
              T* girow = gi + iy * g.w;
              for (std::size_t ix = 0; ix < g.w; ++ix) girow[ix] += wv * gorow[ix * g.stride];
            }
          }
        }
      }
    }
  });
}

template <typename T>
void deconv_backward_weight(const DeconvGeometry& g, const T* gout, const T* x, T* gw) {
  parallel_for(g.cin, [&](std::size_t begin, std::size_t end) {
    for (std::size_t ic = begin; ic < end; ++ic) {
      for (std::size_t oc = 0; oc < g.cout; ++oc) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            T acc = T(0);
            for (std::size_t n = 0; n < g.n; ++n) {
              const T* xin = x + (n * g.cin + ic) * g.h * g.w;
              const T* go = gout + (n * g.cout + oc) * g.ho * g.wo;
              for (std::size_t iy = 0; iy < g.h; ++iy) {
                acc += dot_strided(xin + iy * g.w, go + (iy * g.stride + ky) * g.wo + kx, g.w,
                                   g.stride);
              }
            }
            gw[((ic * g.cout + oc) * g.kh + ky) * g.kw + kx] += acc;
          }
        }
      }
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           std::size_t stride) {
  if (x.rank() != 4 || weight.rank() != 4) {
    throw ContractError("conv_transpose2d: expected 4-D input and weight");
  }
  DLEN_REQUIRE(stride >= 1, "conv_transpose2d: stride must be >= 1");
  if (weight.dim(0) != x.dim(1)) {
    throw ContractError("conv_transpose2d: weight " + shape_str(weight.shape()) +
                        " does not match input channels of " + shape_str(x.shape()));
  }
  DeconvGeometry g{};
  g.n = x.dim(0), g.cin = x.dim(1), g.h = x.dim(2), g.w = x.dim(3);
  g.cout = weight.dim(1), g.kh = weight.dim(2), g.kw = weight.dim(3), g.stride = stride;
  g.ho = (g.h - 1) * stride + g.kh;
  g.wo = (g.w - 1) * stride + g.kw;
  check_bias(bias, g.cout, "conv_transpose2d");
  check_finite(x.data(), "conv_transpose2d input");

  std::vector<T> out(g.n * g.cout * g.ho * g.wo);
  deconv_forward(g, x.data().data(), weight.data().data(),
                 bias.defined() ? bias.data().data() : nullptr, out.data());
  std::vector<Tensor<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(Shape{g.n, g.cout, g.ho, g.wo}, std::move(out), "conv_transpose2d",
                        inputs, [g](TensorImpl<T>& o) {
                          auto& xi = *o.node->inputs[0];
                          auto& wi = *o.node->inputs[1];
                          if (xi.requires_grad) {
                            deconv_backward_input(g, o.grad.data(), wi.data.data(),
                                                  xi.grad_buffer().data());
                          }
                          if (wi.requires_grad) {
                            deconv_backward_weight(g, o.grad.data(), xi.data.data(),
                                                   wi.grad_buffer().data());
                          }
                          if (o.node->inputs.size() > 2 && o.node->inputs[2]->requires_grad) {
                            accumulate_bias_grad(g.n, g.cout, g.ho * g.wo, o.grad.data(),
                                                 o.node->inputs[2]->grad_buffer().data());
                          }
                        });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || a.rank() != b.rank()) {
    throw ContractError("matmul: operands must have equal rank >= 2, got " +
                        shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t r = a.rank();
  for (std::size_t i = 0; i + 2 < r; ++i) {
    if (a.shape()[i] != b.shape()[i]) {
      throw ContractError("matmul: batch extents differ: " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    }
  }
  const std::size_t m = a.shape()[r - 2], k = a.shape()[r - 1], n = b.shape()[r - 1];
  if (b.shape()[r - 2] != k) {
    throw ContractError("matmul: inner extents differ: " + shape_str(a.shape()) + " x " +
                        shape_str(b.shape()));
  }
  const std::size_t batch = a.numel() / std::max<std::size_t>(m * k, 1);
  Shape out_shape = a.shape();
  out_shape[r - 1] = n;
  std::vector<T> out(batch * m * n, T(0));
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  for (std::size_t bt = 0; bt < batch; ++bt) {
    const T* ab = ad + bt * m * k;
    const T* bb = bd + bt * k * n;
    T* cb = out.data() + bt * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      T* crow = cb + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const T av = ab[i * k + p];
        const T* brow = bb + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  return make_result<T>(out_shape, std::move(out), "matmul", {a, b},
                        [batch, m, k, n](TensorImpl<T>& o) {
                          auto& ai = *o.node->inputs[0];
                          auto& bi = *o.node->inputs[1];
                          for (std::size_t bt = 0; bt < batch; ++bt) {
                            const T* gc = o.grad.data() + bt * m * n;
                            const T* ab = ai.data.data() + bt * m * k;
                            const T* bb = bi.data.data() + bt * k * n;
                            if (ai.requires_grad) {
                              T* ga = ai.grad_buffer().data() + bt * m * k;
                              for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t p = 0; p < k; ++p) {
                                  ga[i * k + p] += dot(gc + i * n, bb + p * n, n);
                                }
                              }
                            }
                            if (bi.requires_grad) {
                              T* gb = bi.grad_buffer().data() + bt * k * n;
                              for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t p = 0; p < k; ++p) {
                                  const T av = ab[i * k + p];
                                  T* gbrow = gb + p * n;
                                  const T* gcrow = gc + i * n;
                                  for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * gcrow[j];
                                }
                              }
                            }
                          }
                        });
}

#define DLEN_INSTANTIATE(T)                                                                  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                            Conv2dOptions);                                                  \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                      std::size_t);                                          \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);

DLEN_INSTANTIATE(float)
DLEN_INSTANTIATE(double)

}  // namespace dlen
