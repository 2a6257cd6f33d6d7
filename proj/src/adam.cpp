#include "dlen/adam.hpp"

#include <cmath>

namespace dlen {

template <typename T>
AdamState<T>::AdamState(std::span<const Tensor<T>> params, AdamOptions opts) : options(opts) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    m.emplace_back(p.numel(), T(0));
    v.emplace_back(p.numel(), T(0));
  }
}

template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state) {
  if (params.size() != state.m.size()) {
    throw ContractError("adam_step: state tracks " + std::to_string(state.m.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].numel() != state.m[i].size() ||
        (params[i].has_grad() && params[i].grad().size() != params[i].numel())) {
      throw ContractError("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
  }
  state.step += 1;
  const auto& o = state.options;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(o.beta1), b2 = static_cast<T>(o.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(o.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(o.beta2, t));
  const T lr = static_cast<T>(o.lr), eps = static_cast<T>(o.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    const auto g = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const T gj = g.empty() ? T(0) : g[j];
      m[j] = b1 * m[j] + (T(1) - b1) * gj;
      v[j] = b2 * v[j] + (T(1) - b2) * gj * gj;
      const T mhat = m[j] / c1;
      const T vhat = v[j] / c2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::span<Tensor<float>>, AdamState<float>&);
template void adam_step(std::span<Tensor<double>>, AdamState<double>&);

}  // namespace dlen
