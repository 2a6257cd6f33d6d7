#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dlen/prng.hpp"
#include "dlen/tensor.hpp"

namespace dlen {

// Interleaved RGB, row-major, values in [0, 1] (8-bit value / 255 after loading).
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;

  ImageBuffer() = default;
  ImageBuffer(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0.0f) {}

  float& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
  bool operator==(const ImageBuffer&) const = default;
};

struct ImagePair {
  ImageBuffer low;
  ImageBuffer high;
};

// Binary PPM (P6, maxval 255) only.
ImageBuffer load_image(const std::filesystem::path& path);
// Clamps to [0, 1] and quantizes with round-half-up.
void save_image(const ImageBuffer& image, const std::filesystem::path& path);
std::uint8_t quantize(float value);

// clamp(gain * in^gamma + N(0, noise_sigma), 0, 1), noise drawn in pixel order from `seed`.
ImageBuffer synth_lowlight(const ImageBuffer& image, double gamma, double gain,
                           double noise_sigma, std::uint64_t seed);

// Deterministic stand-in for a well-lit photograph: a smooth color field with flat
// shapes and a little texture, quantized to 8-bit levels.
ImageBuffer procedural_image(std::size_t width, std::size_t height, std::uint64_t seed);

enum class Augment { identity, flip_h, flip_v, rot90, rot180, rot270 };

ImageBuffer crop(const ImageBuffer& image, std::size_t top, std::size_t left, std::size_t height,
                 std::size_t width);
ImageBuffer transform(const ImageBuffer& image, Augment mode);
// Same size x size window from both images.
ImagePair random_crop_pair(const ImagePair& pair, std::size_t size, Prng& rng);
// One of the six augmentations, chosen uniformly, applied to both images.
ImagePair augment_pair(const ImagePair& pair, Prng& rng);

template <typename T>
Tensor<T> to_tensor(const std::vector<ImageBuffer>& batch);
template <typename T>
ImageBuffer from_tensor(const Tensor<T>& t, std::size_t index = 0);

// Reflect-pads the trailing axes on the bottom/right up to multiples of `multiple`.
template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& x, std::size_t multiple);

}  // namespace dlen
