#include "dlen/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dlen/ops.hpp"
#include "dlen/prng.hpp"

namespace dlen {

namespace {

template <typename T>
T checked(T value) {
  if (!std::isfinite(value)) {
    throw NonFiniteError("finite_diff: function returned a non-finite value");
  }
  return value;
}

}  // namespace

template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T h) {
  DLEN_REQUIRE(h > T(0), "finite_diff_grad: step must be positive");
  NoGradGuard no_grad;
  Tensor<T> probe = x.detach();
  std::vector<T> out(x.numel());
  auto values = probe.mutable_data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T saved = values[i];
    values[i] = saved + h;
    const T plus = checked(f(probe));
    values[i] = saved - h;
    const T minus = checked(f(probe));
    values[i] = saved;
    out[i] = (plus - minus) / (T(2) * h);
  }
  return Tensor<T>::from_data(x.shape(), std::move(out));
}

template <typename T>
std::vector<T> finite_diff_entries(const std::function<T()>& f, Tensor<T>& param,
                                   std::span<const std::size_t> indices, T h) {
  DLEN_REQUIRE(h > T(0), "finite_diff_entries: step must be positive");
  NoGradGuard no_grad;
  auto values = param.mutable_data();
  std::vector<T> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    DLEN_REQUIRE(i < values.size(), "finite_diff_entries: index out of range");
    const T saved = values[i];
    values[i] = saved + h;
    const T plus = checked(f());
    values[i] = saved - h;
    const T minus = checked(f());
    values[i] = saved;
    out.push_back((plus - minus) / (T(2) * h));
  }
  return out;
}

template <typename T>
double relative_error(std::span<const T> a, std::span<const T> b, double floor) {
  DLEN_REQUIRE(a.size() == b.size(), "relative_error: size mismatch");
  double diff = 0.0, scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double av = static_cast<double>(a[i]), bv = static_cast<double>(b[i]);
    diff = std::max(diff, std::abs(av - bv));
    scale = std::max({scale, std::abs(av), std::abs(bv)});
  }
  return diff / scale;
}

Tensor<double> random_projection(const Tensor<double>& out, std::uint64_t seed) {
  Prng rng(seed);
  std::vector<double> r(out.numel());
  for (auto& v : r) v = 2.0 * rng.uniform() - 1.0;
  return sum(mul(out, Tensor<double>::from_data(out.shape(), std::move(r))));
}

double input_gradient_error(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& op,
    std::vector<Tensor<double>> inputs, std::uint64_t seed, double h) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  backward(random_projection(op(inputs), seed));
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto f = [&](const Tensor<double>& probe) {
      auto args = inputs;
      args[k] = probe;
      return random_projection(op(args), seed).item();
    };
    auto numeric = finite_diff_grad<double>(f, inputs[k], h);
    auto analytic = inputs[k].grad_tensor();
    worst = std::max(worst, relative_error<double>(analytic.data(), numeric.data()));
  }
  return worst;
}

double param_gradient_error(const std::function<Tensor<double>()>& loss_fn,
                            std::vector<Tensor<double>> params, std::size_t max_entries,
                            std::uint64_t seed, double h) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  backward(loss_fn());
  Prng rng(seed);
  double worst = 0.0;
  for (auto& p : params) {
    std::vector<std::size_t> idx;
    if (p.numel() <= max_entries) {
      for (std::size_t i = 0; i < p.numel(); ++i) idx.push_back(i);
    } else {
      for (std::size_t i = 0; i < max_entries; ++i) idx.push_back(rng.below(p.numel()));
    }
    auto numeric = finite_diff_entries<double>([&] { return loss_fn().item(); }, p, idx, h);
    std::vector<double> analytic;
    for (std::size_t i : idx) analytic.push_back(p.has_grad() ? p.grad()[i] : 0.0);
    worst = std::max(worst, relative_error<double>(analytic, numeric));
  }
  return worst;
}

template Tensor<float> finite_diff_grad(const std::function<float(const Tensor<float>&)>&,
                                        const Tensor<float>&, float);
template Tensor<double> finite_diff_grad(const std::function<double(const Tensor<double>&)>&,
                                         const Tensor<double>&, double);
template std::vector<float> finite_diff_entries(const std::function<float()>&, Tensor<float>&,
                                                std::span<const std::size_t>, float);
template std::vector<double> finite_diff_entries(const std::function<double()>&, Tensor<double>&,
                                                 std::span<const std::size_t>, double);
template double relative_error(std::span<const float>, std::span<const float>, double);
template double relative_error(std::span<const double>, std::span<const double>, double);

}  // namespace dlen
