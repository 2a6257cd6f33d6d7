#pragma once

#include <vector>

#include "dlen/image.hpp"
#include "dlen/tensor.hpp"

// Slow, literal reference implementations used to validate the optimized code.
namespace dlen::oracle {

// Per-window SSIM with explicit weighted means, variances and covariance, averaged
// over windows and channels.
double ssim_windowed(const ImageBuffer& a, const ImageBuffer& b, double range = 1.0);

double mse(const ImageBuffer& a, const ImageBuffer& b);

// Per-pixel channel mean by direct loop.
std::vector<double> channel_mean(const Tensor<double>& image);

// Nested-loop zero-padded cross-correlation.
std::vector<double> conv2d(const Tensor<double>& x, const Tensor<double>& weight,
                           std::size_t stride, std::size_t padding, std::size_t groups);

}  // namespace dlen::oracle
