#include <algorithm>
#include <cmath>
#include <numeric>

#include "dlen/ops.hpp"

namespace dlen {

namespace {

Shape row_major_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// Flat source index for every destination element of a permutation.
std::vector<std::size_t> permutation_gather(const Shape& in_shape,
                                            const std::vector<std::size_t>& order) {
  const Shape in_strides = row_major_strides(in_shape);
  Shape out_shape(order.size());
  Shape src_strides(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    out_shape[i] = in_shape[order[i]];
    src_strides[i] = in_strides[order[i]];
  }
  const std::size_t n = shape_numel(in_shape);
  std::vector<std::size_t> gather(n);
  std::vector<std::size_t> idx(order.size(), 0);
  std::size_t src = 0;
  for (std::size_t dst = 0; dst < n; ++dst) {
    gather[dst] = src;
    for (std::size_t ax = order.size(); ax-- > 0;) {
      ++idx[ax];
      src += src_strides[ax];
      if (idx[ax] < out_shape[ax]) break;
      src -= src_strides[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  return gather;
}

// Maps a destination coordinate to its reflect-padded source coordinate.
std::size_t reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < n ? m : period - m);
}

}  // namespace

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ContractError("reshape: cannot reshape " + shape_str(x.shape()) + " to " +
                        shape_str(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>(shape, std::move(out), "reshape", {x}, [](TensorImpl<T>& o) {
    auto& g = o.node->inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& order) {
  if (order.size() != x.rank()) throw ContractError("permute: order rank mismatch");
  std::vector<std::size_t> check = order;
  std::sort(check.begin(), check.end());
  for (std::size_t i = 0; i < check.size(); ++i) {
    if (check[i] != i) throw ContractError("permute: order is not a permutation");
  }
  Shape out_shape(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) out_shape[i] = x.shape()[order[i]];
  auto gather = permutation_gather(x.shape(), order);
  const auto xd = x.data();
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[gather[i]];
  return make_result<T>(out_shape, std::move(out), "permute", {x},
                        [gather = std::move(gather)](TensorImpl<T>& o) {
                          auto& g = o.node->inputs[0]->grad_buffer();
                          for (std::size_t i = 0; i < gather.size(); ++i) g[gather[i]] += o.grad[i];
                        });
}

template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
  DLEN_REQUIRE(x.rank() >= 2, "transpose_last2: rank must be at least 2");
  std::vector<std::size_t> order(x.rank());
  std::iota(order.begin(), order.end(), 0);
  std::swap(order[x.rank() - 1], order[x.rank() - 2]);
  return permute(x, order);
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  DLEN_REQUIRE(!parts.empty(), "concat: no inputs");
  const Shape& first = parts[0].shape();
  const std::size_t ax = normalize_axis(axis, first.size());
  Shape out_shape = first;
  out_shape[ax] = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) throw ContractError("concat: rank mismatch");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (i != ax && p.shape()[i] != first[i]) {
        throw ContractError("concat: extents differ off-axis: " + shape_str(first) + " vs " +
                            shape_str(p.shape()));
      }
    }
    out_shape[ax] += p.shape()[ax];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= first[i];
  for (std::size_t i = ax + 1; i < first.size(); ++i) inner *= first[i];
  const std::size_t out_block = out_shape[ax] * inner;
  std::vector<T> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t block = p.shape()[ax] * inner;
    const auto pd = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pd.data() + o * block, block, out.data() + o * out_block + offset);
    }
    offset += block;
  }
  return make_result<T>(out_shape, std::move(out), "concat", parts,
                        [outer, out_block, offsets](TensorImpl<T>& o) {
                          for (std::size_t k = 0; k < o.node->inputs.size(); ++k) {
                            auto& in = *o.node->inputs[k];
                            if (!in.requires_grad) continue;
                            auto& g = in.grad_buffer();
                            const std::size_t block = in.data.size() / outer;
                            for (std::size_t ou = 0; ou < outer; ++ou) {
                              const T* src = o.grad.data() + ou * out_block + offsets[k];
                              T* dst = g.data() + ou * block;
                              for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::size_t start, std::size_t length) {
  const std::size_t ax = normalize_axis(axis, x.rank());
  if (start + length > x.shape()[ax]) {
    throw ContractError("slice: range [" + std::to_string(start) + ", " +
                        std::to_string(start + length) + ") exceeds extent " +
                        std::to_string(x.shape()[ax]));
  }
  Shape out_shape = x.shape();
  out_shape[ax] = length;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= x.shape()[i];
  for (std::size_t i = ax + 1; i < x.rank(); ++i) inner *= x.shape()[i];
  const std::size_t in_block = x.shape()[ax] * inner;
  const std::size_t out_block = length * inner;
  const std::size_t skip = start * inner;
  const auto xd = x.data();
  std::vector<T> out(outer * out_block);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xd.data() + o * in_block + skip, out_block, out.data() + o * out_block);
  }
  return make_result<T>(out_shape, std::move(out), "slice", {x},
                        [outer, in_block, out_block, skip](TensorImpl<T>& o) {
                          auto& g = o.node->inputs[0]->grad_buffer();
                          for (std::size_t ou = 0; ou < outer; ++ou) {
                            const T* src = o.grad.data() + ou * out_block;
                            T* dst = g.data() + ou * in_block + skip;
                            for (std::size_t i = 0; i < out_block; ++i) dst[i] += src[i];
                          }
                        });
}

template <typename T>
Tensor<T> pad_reflect(const Tensor<T>& x, std::size_t top, std::size_t bottom, std::size_t left,
                      std::size_t right) {
  DLEN_REQUIRE(x.rank() >= 2, "pad_reflect: rank must be at least 2");
  const std::size_t h = x.dim(-2), w = x.dim(-1);
  DLEN_REQUIRE(top < h && bottom < h && left < w && right < w,
               "pad_reflect: padding must be smaller than the padded extent");
  const std::size_t oh = h + top + bottom, ow = w + left + right;
  const std::size_t planes = x.numel() / (h * w);
  std::vector<std::size_t> src_row(oh), src_col(ow);
  for (std::size_t i = 0; i < oh; ++i) {
    src_row[i] = reflect_index(static_cast<long>(i) - static_cast<long>(top), static_cast<long>(h));
  }
  for (std::size_t j = 0; j < ow; ++j) {
    src_col[j] =
        reflect_index(static_cast<long>(j) - static_cast<long>(left), static_cast<long>(w));
  }
  Shape out_shape = x.shape();
  out_shape[x.rank() - 2] = oh;
  out_shape[x.rank() - 1] = ow;
  const auto xd = x.data();
  std::vector<T> out(planes * oh * ow);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        out[(p * oh + i) * ow + j] = xd[(p * h + src_row[i]) * w + src_col[j]];
      }
    }
  }
  return make_result<T>(out_shape, std::move(out), "pad_reflect", {x},
                        [planes, h, w, oh, ow, src_row, src_col](TensorImpl<T>& o) {
                          auto& g = o.node->inputs[0]->grad_buffer();
                          for (std::size_t p = 0; p < planes; ++p) {
                            for (std::size_t i = 0; i < oh; ++i) {
                              for (std::size_t j = 0; j < ow; ++j) {
                                g[(p * h + src_row[i]) * w + src_col[j]] +=
                                    o.grad[(p * oh + i) * ow + j];
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t k) {
  DLEN_REQUIRE(x.rank() >= 2 && k >= 1, "avg_pool2d: bad arguments");
  const std::size_t h = x.dim(-2), w = x.dim(-1);
  if (h % k != 0 || w % k != 0) {
    throw ContractError("avg_pool2d: extents " + shape_str(x.shape()) + " not divisible by " +
                        std::to_string(k));
  }
  const std::size_t oh = h / k, ow = w / k;
  const std::size_t planes = x.numel() / (h * w);
  const T scale = T(1) / static_cast<T>(k * k);
  Shape out_shape = x.shape();
  out_shape[x.rank() - 2] = oh;
  out_shape[x.rank() - 1] = ow;
  const auto xd = x.data();
  std::vector<T> out(planes * oh * ow, T(0));
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        out[(p * oh + i / k) * ow + j / k] += xd[(p * h + i) * w + j];
      }
    }
  }
  for (auto& v : out) v *= scale;
  return make_result<T>(out_shape, std::move(out), "avg_pool2d", {x},
                        [planes, h, w, oh, ow, k, scale](TensorImpl<T>& o) {
                          auto& g = o.node->inputs[0]->grad_buffer();
                          for (std::size_t p = 0; p < planes; ++p) {
                            for (std::size_t i = 0; i < h; ++i) {
                              for (std::size_t j = 0; j < w; ++j) {
                                g[(p * h + i) * w + j] +=
                                    o.grad[(p * oh + i / k) * ow + j / k] * scale;
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::size_t height, std::size_t width) {
  DLEN_REQUIRE(x.rank() >= 2 && height > 0 && width > 0, "resize_bilinear: bad arguments");
  const std::size_t h = x.dim(-2), w = x.dim(-1);
  if (h == height && w == width) return reshape(x, x.shape());

  struct Tap {
    std::size_t i0, i1;
    T f;  // weight of i1
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      t[o] = {i0, i1, static_cast<T>(src - static_cast<double>(i0))};
    }
    return t;
  };
  const auto rows = taps(h, height);
  const auto cols = taps(w, width);
  const std::size_t planes = x.numel() / (h * w);
  Shape out_shape = x.shape();
  out_shape[x.rank() - 2] = height;
  out_shape[x.rank() - 1] = width;
  const auto xd = x.data();
  std::vector<T> out(planes * height * width);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xd.data() + p * h * w;
    for (std::size_t i = 0; i < height; ++i) {
      const Tap& r = rows[i];
      for (std::size_t j = 0; j < width; ++j) {
        const Tap& c = cols[j];
        const T top = src[r.i0 * w + c.i0] * (T(1) - c.f) + src[r.i0 * w + c.i1] * c.f;
        const T bot = src[r.i1 * w + c.i0] * (T(1) - c.f) + src[r.i1 * w + c.i1] * c.f;
        out[(p * height + i) * width + j] = top * (T(1) - r.f) + bot * r.f;
      }
    }
  }
  return make_result<T>(
      out_shape, std::move(out), "resize_bilinear", {x},
      [planes, h, w, height, width, rows, cols](TensorImpl<T>& o) {
        auto& g = o.node->inputs[0]->grad_buffer();
        for (std::size_t p = 0; p < planes; ++p) {
          T* dst = g.data() + p * h * w;
          for (std::size_t i = 0; i < height; ++i) {
            const Tap& r = rows[i];
            for (std::size_t j = 0; j < width; ++j) {
              const Tap& c = cols[j];
              const T gv = o.grad[(p * height + i) * width + j];
              dst[r.i0 * w + c.i0] += gv * (T(1) - r.f) * (T(1) - c.f);
              dst[r.i0 * w + c.i1] += gv * (T(1) - r.f) * c.f;
              dst[r.i1 * w + c.i0] += gv * r.f * (T(1) - c.f);
              dst[r.i1 * w + c.i1] += gv * r.f * c.f;
            }
          }
        }
      });
}

#define DLEN_INSTANTIATE(T)                                                                  \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                                \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);             \
  template Tensor<T> transpose_last2(const Tensor<T>&);                                      \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                             \
  template Tensor<T> slice(const Tensor<T>&, int, std::size_t, std::size_t);                 \
  template Tensor<T> pad_reflect(const Tensor<T>&, std::size_t, std::size_t, std::size_t,    \
                                 std::size_t);                                               \
  template Tensor<T> avg_pool2d(const Tensor<T>&, std::size_t);                              \
  template Tensor<T> resize_bilinear(const Tensor<T>&, std::size_t, std::size_t);

DLEN_INSTANTIATE(float)
DLEN_INSTANTIATE(double)

}  // namespace dlen
