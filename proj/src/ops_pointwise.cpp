#include <cmath>

#include "broadcast.hpp"
#include "dlen/ops.hpp"

namespace dlen {

namespace {

using detail::BroadcastMap;

template <typename T>
Tensor<T> unary(const Tensor<T>& x, const char* name, T (*f)(T), T (*df)(T)) {
  std::vector<T> out(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xd[i]);
  return make_result<T>(x.shape(), std::move(out), name, {x}, [df](TensorImpl<T>& o) {
    auto& in = *o.node->inputs[0];
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * df(in.data[i]);
  });
}

template <typename T>
T gelu_value(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

template <typename T>
T gelu_derivative(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2))));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * T(M_PI));
  return cdf + x * pdf;
}

template <typename T>
T abs_value(T x) {
  return std::abs(x);
}

template <typename T>
T abs_derivative(T x) {
  return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0));
}

}  // namespace

template <typename T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind) {
  BroadcastMap map(a.shape(), b.shape());
  std::vector<T> out(a.numel());
  const auto ad = a.data();
  const auto bd = b.data();
  switch (kind) {
    case BinaryKind::add:
      map.for_each([&](std::size_t i, std::size_t j) { out[i] = ad[i] + bd[j]; });
      break;
    case BinaryKind::sub:
      map.for_each([&](std::size_t i, std::size_t j) { out[i] = ad[i] - bd[j]; });
      break;
    case BinaryKind::mul:
      map.for_each([&](std::size_t i, std::size_t j) { out[i] = ad[i] * bd[j]; });
      break;
    case BinaryKind::div:
      map.for_each([&](std::size_t i, std::size_t j) { out[i] = ad[i] / bd[j]; });
      break;
  }
  return make_result<T>(
      a.shape(), std::move(out), "elementwise", {a, b}, [map, kind](TensorImpl<T>& o) {
        auto& ai = *o.node->inputs[0];
        auto& bi = *o.node->inputs[1];
        const auto& g = o.grad;
        if (ai.requires_grad) {
          auto& ga = ai.grad_buffer();
          switch (kind) {
            case BinaryKind::add:
            case BinaryKind::sub:
              for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
              break;
            case BinaryKind::mul:
              map.for_each([&](std::size_t i, std::size_t j) { ga[i] += g[i] * bi.data[j]; });
              break;
            case BinaryKind::div:
              map.for_each([&](std::size_t i, std::size_t j) { ga[i] += g[i] / bi.data[j]; });
              break;
          }
        }
        if (bi.requires_grad) {
          auto& gb = bi.grad_buffer();
          switch (kind) {
            case BinaryKind::add:
              map.for_each([&](std::size_t i, std::size_t j) { gb[j] += g[i]; });
              break;
            case BinaryKind::sub:
              map.for_each([&](std::size_t i, std::size_t j) { gb[j] -= g[i]; });
              break;
            case BinaryKind::mul:
              map.for_each([&](std::size_t i, std::size_t j) { gb[j] += g[i] * ai.data[i]; });
              break;
            case BinaryKind::div:
              map.for_each([&](std::size_t i, std::size_t j) {
                const T bv = bi.data[j];
                gb[j] -= g[i] * ai.data[i] / (bv * bv);
              });
              break;
          }
        }
      });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v += value;
  return make_result<T>(x.shape(), std::move(out), "add_scalar", {x}, [](TensorImpl<T>& o) {
    auto& g = o.node->inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T value) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= value;
  return make_result<T>(x.shape(), std::move(out), "mul_scalar", {x}, [value](TensorImpl<T>& o) {
    auto& g = o.node->inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * value;
  });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary<T>(x, "abs", &abs_value<T>, &abs_derivative<T>);
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  return unary<T>(x, "gelu", &gelu_value<T>, &gelu_derivative<T>);
}

#define DLEN_INSTANTIATE(T)                                                       \
  template Tensor<T> elementwise(const Tensor<T>&, const Tensor<T>&, BinaryKind); \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                             \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                             \
  template Tensor<T> abs(const Tensor<T>&);                                       \
  template Tensor<T> gelu(const Tensor<T>&);

DLEN_INSTANTIATE(float)
DLEN_INSTANTIATE(double)

}  // namespace dlen
