#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dlen/tensor.hpp"

namespace dlen {

// Central-difference estimate of df/dx: (f(x + h e_i) - f(x - h e_i)) / (2h) for every
// element i. `f` receives a perturbed copy of x and must be deterministic.
template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x,
                           T h = T(1e-4));

// Same estimate for selected entries of a tensor that `f` reads by reference (model
// parameters). The tensor is perturbed in place and restored before returning.
template <typename T>
std::vector<T> finite_diff_entries(const std::function<T()>& f, Tensor<T>& param,
                                   std::span<const std::size_t> indices, T h = T(1e-4));

// max |a - b| / max(max |a|, max |b|, floor). The floor keeps all-but-zero gradients
// from turning rounding noise into large ratios.
template <typename T>
double relative_error(std::span<const T> a, std::span<const T> b, double floor = 1e-6);

// sum(out * R) with R uniform in [-1, 1] drawn from `seed`, so every output element
// contributes a distinct gradient.
Tensor<double> random_projection(const Tensor<double>& out, std::uint64_t seed);

// Worst relative error, over every input of `op`, between backward() and central
// differences of random_projection(op(inputs)).
double input_gradient_error(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& op,
    std::vector<Tensor<double>> inputs, std::uint64_t seed, double h = 1e-5);

// Backward of loss_fn() against central differences on up to `max_entries` sampled
// entries of each tensor in `params`. Returns the worst per-tensor relative error.
double param_gradient_error(const std::function<Tensor<double>()>& loss_fn,
                            std::vector<Tensor<double>> params, std::size_t max_entries,
                            std::uint64_t seed, double h = 1e-5);

}  // namespace dlen
