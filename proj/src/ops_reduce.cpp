#include <algorithm>
#include <cmath>
#include <set>

#include "broadcast.hpp"
#include "dlen/ops.hpp"

namespace dlen {

namespace {

using detail::BroadcastMap;

struct Reduction {
  Shape keep_shape;  // reduced axes kept as extent 1
  Shape out_shape;   // per keepdim choice
  std::size_t count = 1;
};

Reduction plan_reduction(const Shape& shape, const std::vector<int>& axes, bool keepdim) {
  std::set<std::size_t> reduced;
  for (int a : axes) {
    if (!reduced.insert(normalize_axis(a, shape.size())).second) {
      throw ContractError("reduce: duplicate axis " + std::to_string(a));
    }
  }
  Reduction r;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (reduced.count(i)) {
      r.keep_shape.push_back(1);
      r.count *= shape[i];
      if (keepdim) r.out_shape.push_back(1);
    } else {
      r.keep_shape.push_back(shape[i]);
      r.out_shape.push_back(shape[i]);
    }
  }
  return r;
}

template <typename T>
Tensor<T> reduce_impl(const Tensor<T>& x, const std::vector<int>& axes, bool keepdim, bool mean,
                      const char* name) {
  const Reduction r = plan_reduction(x.shape(), axes, keepdim);
  BroadcastMap map(x.shape(), r.keep_shape);
  std::vector<T> out(shape_numel(r.keep_shape), T(0));
  const auto xd = x.data();
  map.for_each([&](std::size_t i, std::size_t j) { out[j] += xd[i]; });
  const T scale = mean ? T(1) / static_cast<T>(std::max<std::size_t>(r.count, 1)) : T(1);
  if (mean) {
    for (auto& v : out) v *= scale;
  }
  return make_result<T>(r.out_shape, std::move(out), name, {x}, [map, scale](TensorImpl<T>& o) {
    auto& g = o.node->inputs[0]->grad_buffer();
    map.for_each([&](std::size_t i, std::size_t j) { g[i] += o.grad[j] * scale; });
  });
}

// Splits a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = T(0);
  for (T v : x.data()) total += v;
  return make_result<T>(Shape{}, std::vector<T>{total}, "sum", {x}, [](TensorImpl<T>& o) {
    auto& g = o.node->inputs[0]->grad_buffer();
    for (auto& v : g) v += o.grad[0];
  });
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x, const std::vector<int>& axes, bool keepdim) {
  return reduce_impl(x, axes, keepdim, true, "reduce_mean");
}

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, const std::vector<int>& axes, bool keepdim) {
  return reduce_impl(x, axes, keepdim, false, "reduce_sum");
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  check_finite(x.data(), "softmax input");
  const std::size_t ax = normalize_axis(axis, x.rank());
  const AxisSplit s = split_axis(x.shape(), ax);
  const auto xd = x.data();
  std::vector<T> out(x.numel());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      T mx = xd[base];
      for (std::size_t k = 1; k < s.extent; ++k) mx = std::max(mx, xd[base + k * s.inner]);
      T total = T(0);
      for (std::size_t k = 0; k < s.extent; ++k) {
        const T e = std::exp(xd[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] /= total;
    }
  }
  return make_result<T>(x.shape(), std::move(out), "softmax", {x}, [s](TensorImpl<T>& o) {
    auto& g = o.node->inputs[0]->grad_buffer();
    const auto& y = o.data;
    for (std::size_t ou = 0; ou < s.outer; ++ou) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = ou * s.extent * s.inner + in;
        T dot = T(0);
        for (std::size_t k = 0; k < s.extent; ++k) {
          dot += o.grad[base + k * s.inner] * y[base + k * s.inner];
        }
        for (std::size_t k = 0; k < s.extent; ++k) {
          const std::size_t i = base + k * s.inner;
          g[i] += y[i] * (o.grad[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
                     int axis) {
  const std::size_t ax = normalize_axis(axis, x.rank());
  const AxisSplit s = split_axis(x.shape(), ax);
  if (gamma.shape() != Shape{s.extent} || beta.shape() != Shape{s.extent}) {
    throw ContractError("layer_norm: gamma/beta must have shape [" + std::to_string(s.extent) +
                        "], got " + shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
  }
  DLEN_REQUIRE(eps > T(0), "layer_norm: eps must be positive");
  const auto xd = x.data();
  const auto gd = gamma.data();
  const auto bd = beta.data();
  std::vector<T> out(x.numel());
  std::vector<T> xhat(x.numel());
  std::vector<T> inv_std(s.outer * s.inner);
  std::vector<T> mean(s.inner), var(s.inner);
  const T n = static_cast<T>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o) {
    const std::size_t base = o * s.extent * s.inner;
    std::fill(mean.begin(), mean.end(), T(0));
    std::fill(var.begin(), var.end(), T(0));
    for (std::size_t k = 0; k < s.extent; ++k) {
      const T* row = xd.data() + base + k * s.inner;
      for (std::size_t in = 0; in < s.inner; ++in) mean[in] += row[in];
    }
    for (auto& m : mean) m /= n;
    for (std::size_t k = 0; k < s.extent; ++k) {
      const T* row = xd.data() + base + k * s.inner;
      for (std::size_t in = 0; in < s.inner; ++in) {
        const T d = row[in] - mean[in];
        var[in] += d * d;
      }
    }
    T* istd = inv_std.data() + o * s.inner;
    for (std::size_t in = 0; in < s.inner; ++in) istd[in] = T(1) / std::sqrt(var[in] / n + eps);
    for (std::size_t k = 0; k < s.extent; ++k) {
      const std::size_t off = base + k * s.inner;
      for (std::size_t in = 0; in < s.inner; ++in) {
        const T h = (xd[off + in] - mean[in]) * istd[in];
        xhat[off + in] = h;
        out[off + in] = gd[k] * h + bd[k];
      }
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), "layer_norm", {x, gamma, beta},
      [s, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorImpl<T>& o) {
        auto& xi = *o.node->inputs[0];
        auto& gi = *o.node->inputs[1];
        auto& bi = *o.node->inputs[2];
        const auto& g = o.grad;
        if (gi.requires_grad || bi.requires_grad) {
          auto& gg = gi.grad_buffer();
          auto& gb = bi.grad_buffer();
          for (std::size_t ou = 0; ou < s.outer; ++ou) {
            for (std::size_t k = 0; k < s.extent; ++k) {
              const std::size_t off = (ou * s.extent + k) * s.inner;
              T sg = T(0), sb = T(0);
              for (std::size_t in = 0; in < s.inner; ++in) {
                sg += g[off + in] * xhat[off + in];
                sb += g[off + in];
              }
              gg[k] += sg;
              gb[k] += sb;
            }
          }
        }
        if (!xi.requires_grad) return;
        auto& gx = xi.grad_buffer();
        const auto& gamma_v = gi.data;
        const T n = static_cast<T>(s.extent);
        std::vector<T> mean_d(s.inner), mean_dx(s.inner);
        for (std::size_t ou = 0; ou < s.outer; ++ou) {
          const std::size_t base = ou * s.extent * s.inner;
          std::fill(mean_d.begin(), mean_d.end(), T(0));
          std::fill(mean_dx.begin(), mean_dx.end(), T(0));
          for (std::size_t k = 0; k < s.extent; ++k) {
            const std::size_t off = base + k * s.inner;
            for (std::size_t in = 0; in < s.inner; ++in) {
              const T d = g[off + in] * gamma_v[k];
              mean_d[in] += d;
              mean_dx[in] += d * xhat[off + in];
            }
          }
          for (std::size_t in = 0; in < s.inner; ++in) {
            mean_d[in] /= n;
            mean_dx[in] /= n;
          }
          const T* istd = inv_std.data() + ou * s.inner;
          for (std::size_t k = 0; k < s.extent; ++k) {
            const std::size_t off = base + k * s.inner;
            for (std::size_t in = 0; in < s.inner; ++in) {
              const T d = g[off + in] * gamma_v[k];
              gx[off + in] += istd[in] * (d - mean_d[in] - xhat[off + in] * mean_dx[in]);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x, int axis, T eps) {
  DLEN_REQUIRE(eps > T(0), "l2_normalize: eps must be positive");
  check_finite(x.data(), "l2_normalize input");
  const std::size_t ax = normalize_axis(axis, x.rank());
  const AxisSplit s = split_axis(x.shape(), ax);
  const auto xd = x.data();
  std::vector<T> out(x.numel());
  std::vector<T> norms(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      T sq = T(0);
      for (std::size_t k = 0; k < s.extent; ++k) sq += xd[base + k * s.inner] * xd[base + k * s.inner];
      const T n = std::max(std::sqrt(sq), eps);
      norms[o * s.inner + in] = n;
      for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] = xd[base + k * s.inner] / n;
    }
  }
  return make_result<T>(x.shape(), std::move(out), "l2_normalize", {x},
                        [s, eps, norms = std::move(norms)](TensorImpl<T>& o) {
    auto& g = o.node->inputs[0]->grad_buffer();
    const auto& y = o.data;
    for (std::size_t ou = 0; ou < s.outer; ++ou) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = ou * s.extent * s.inner + in;
        const T n = norms[ou * s.inner + in];
        // Below eps the divisor is constant.
        T dot = T(0);
        if (n > eps) {
          for (std::size_t k = 0; k < s.extent; ++k) {
            dot += o.grad[base + k * s.inner] * y[base + k * s.inner];
          }
        }
        for (std::size_t k = 0; k < s.extent; ++k) {
          const std::size_t i = base + k * s.inner;
          g[i] += (o.grad[i] - y[i] * dot) / n;
        }
      }
    }
  });
}

#define DLEN_INSTANTIATE(T)                                                                   \
  template Tensor<T> sum(const Tensor<T>&);                                                   \
  template Tensor<T> reduce_mean(const Tensor<T>&, const std::vector<int>&, bool);            \
  template Tensor<T> reduce_sum(const Tensor<T>&, const std::vector<int>&, bool);             \
  template Tensor<T> softmax(const Tensor<T>&, int);                                          \
  template Tensor<T> l2_normalize(const Tensor<T>&, int, T);                                  \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T, int);

DLEN_INSTANTIATE(float)
DLEN_INSTANTIATE(double)

}  // namespace dlen
