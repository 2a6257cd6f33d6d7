#include "dlen/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dlen/error.hpp"
#include "dlen/ops.hpp"

namespace dlen {

namespace {

// Reads one header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw FormatError(path.string() + ": truncated PPM header");
  return tok;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path) {
  const auto tok = header_token(in, path);
  std::size_t value = 0;
  for (char c : tok) {
    if (c < '0' || c > '9') throw FormatError(path.string() + ": bad PPM header field '" + tok + "'");
    value = value * 10 + static_cast<std::size_t>(c - '0');
    if (value > (1u << 24)) throw FormatError(path.string() + ": PPM dimension too large");
  }
  return value;
}

}  // namespace

std::uint8_t quantize(float value) {
  const double v = std::clamp(static_cast<double>(value), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

ImageBuffer load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open image " + path.string());
  if (header_token(in, path) != "P6") {
    throw FormatError(path.string() + ": not a binary PPM (P6) file");
  }
  const std::size_t w = header_number(in, path);
  const std::size_t h = header_number(in, path);
  const std::size_t maxval = header_number(in, path);
  if (w == 0 || h == 0) throw FormatError(path.string() + ": zero image dimension");
  if (maxval != 255) {
    throw FormatError(path.string() + ": maxval " + std::to_string(maxval) +
                      " unsupported (only 255)");
  }
  std::vector<unsigned char> bytes(w * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw FormatError(path.string() + ": truncated pixel data (" + std::to_string(in.gcount()) +
                      " of " + std::to_string(bytes.size()) + " bytes)");
  }
  ImageBuffer img(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.pixels[i] = bytes[i] / 255.0f;
  return img;
}

void save_image(const ImageBuffer& image, const std::filesystem::path& path) {
  DLEN_REQUIRE(image.pixels.size() == image.width * image.height * 3, "save_image: bad buffer");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NotFoundError("cannot write image " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize(image.pixels[i]);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

ImageBuffer synth_lowlight(const ImageBuffer& image, double gamma, double gain,
                           double noise_sigma, std::uint64_t seed) {
  DLEN_REQUIRE(gamma > 0.0, "synth_lowlight: gamma must be positive");
  DLEN_REQUIRE(gain > 0.0 && gain <= 1.0, "synth_lowlight: gain must lie in (0, 1]");
  DLEN_REQUIRE(noise_sigma >= 0.0, "synth_lowlight: noise sigma must be non-negative");
  Prng rng(seed);
  ImageBuffer out = image;
  for (auto& v : out.pixels) {
    double x = gain * std::pow(static_cast<double>(v), gamma);
    if (noise_sigma > 0.0) x += noise_sigma * rng.normal();
    v = static_cast<float>(std::clamp(x, 0.0, 1.0));
  }
  return out;
}

ImageBuffer procedural_image(std::size_t width, std::size_t height, std::uint64_t seed) {
  Prng rng(seed);
  double corner[4][3];
  for (auto& c : corner)
    for (auto& v : c) v = 0.15 + 0.8 * rng.uniform();
  struct Shape {
    double cx, cy, r, color[3];
    bool disc;
  };
  std::vector<Shape> shapes(4 + rng.below(4));
  for (auto& s : shapes) {
    s.cx = rng.uniform() * width;
    s.cy = rng.uniform() * height;
    s.r = (0.08 + 0.2 * rng.uniform()) * std::min(width, height);
    for (auto& c : s.color) c = 0.1 + 0.9 * rng.uniform();
    s.disc = rng.below(2) == 0;
  }
  const double freq = 0.15 + 0.5 * rng.uniform(), angle = 6.283185307179586 * rng.uniform();
  const double fx = freq * std::cos(angle), fy = freq * std::sin(angle);

  ImageBuffer img(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double u = width > 1 ? double(x) / (width - 1) : 0.0;
      const double v = height > 1 ? double(y) / (height - 1) : 0.0;
      double px[3];
      for (int c = 0; c < 3; ++c) {
        px[c] = (1 - u) * (1 - v) * corner[0][c] + u * (1 - v) * corner[1][c] +
                (1 - u) * v * corner[2][c] + u * v * corner[3][c];
      }
      for (const auto& s : shapes) {
        const double dx = x - s.cx, dy = y - s.cy;
        const bool inside = s.disc ? dx * dx + dy * dy < s.r * s.r
                                   : std::abs(dx) < s.r && std::abs(dy) < 0.6 * s.r;
        if (inside) std::copy(s.color, s.color + 3, px);
      }
      const double texture = 0.06 * std::sin(fx * x + fy * y);
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = quantize(static_cast<float>(px[c] + texture)) / 255.0f;
      }
    }
  }
  return img;
}

ImageBuffer crop(const ImageBuffer& image, std::size_t top, std::size_t left, std::size_t height,
                 std::size_t width) {
  DLEN_REQUIRE(top + height <= image.height && left + width <= image.width,
               "crop window exceeds the image");
  ImageBuffer out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const auto* src = &image.pixels[((top + y) * image.width + left) * 3];
    std::copy(src, src + width * 3, &out.pixels[y * width * 3]);
  }
  return out;
}

ImageBuffer transform(const ImageBuffer& image, Augment mode) {
  const std::size_t w = image.width, h = image.height;
  const bool swap = mode == Augment::rot90 || mode == Augment::rot270;
  ImageBuffer out(swap ? h : w, swap ? w : h);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      std::size_t sy = y, sx = x;
      switch (mode) {
        case Augment::identity: break;
        case Augment::flip_h: sx = w - 1 - x; break;
        case Augment::flip_v: sy = h - 1 - y; break;
        case Augment::rot90: sy = h - 1 - x; sx = y; break;  // counter-clockwise
        case Augment::rot180: sy = h - 1 - y; sx = w - 1 - x; break;
        case Augment::rot270: sy = x; sx = w - 1 - y; break;
      }
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(sy, sx, c);
    }
  }
  return out;
}

ImagePair random_crop_pair(const ImagePair& pair, std::size_t size, Prng& rng) {
  DLEN_REQUIRE(pair.low.width == pair.high.width && pair.low.height == pair.high.height,
               "paired images differ in size");
  DLEN_REQUIRE(size > 0 && size <= pair.low.width && size <= pair.low.height,
               "crop size " + std::to_string(size) + " exceeds image " +
                   std::to_string(pair.low.width) + "x" + std::to_string(pair.low.height));
  const std::size_t top = rng.below(pair.low.height - size + 1);
  const std::size_t left = rng.below(pair.low.width - size + 1);
  return {crop(pair.low, top, left, size, size), crop(pair.high, top, left, size, size)};
}

ImagePair augment_pair(const ImagePair& pair, Prng& rng) {
  const auto mode = static_cast<Augment>(rng.below(6));
  return {transform(pair.low, mode), transform(pair.high, mode)};
}

template <typename T>
Tensor<T> to_tensor(const std::vector<ImageBuffer>& batch) {
  DLEN_REQUIRE(!batch.empty(), "to_tensor: empty batch");
  const std::size_t w = batch[0].width, h = batch[0].height, plane = w * h;
  std::vector<T> data(batch.size() * 3 * plane);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    DLEN_REQUIRE(batch[n].width == w && batch[n].height == h, "to_tensor: mixed image sizes");
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t c = 0; c < 3; ++c) {
        data[(n * 3 + c) * plane + p] = static_cast<T>(batch[n].pixels[p * 3 + c]);
      }
  }
  return Tensor<T>::from_data({batch.size(), 3, h, w}, std::move(data));
}

template <typename T>
ImageBuffer from_tensor(const Tensor<T>& t, std::size_t index) {
  DLEN_REQUIRE(t.rank() == 4 && t.dim(1) == 3 && index < t.dim(0),
               "from_tensor expects [N, 3, H, W], got " + shape_str(t.shape()));
  const std::size_t h = t.dim(2), w = t.dim(3), plane = h * w;
  ImageBuffer img(w, h);
  const auto d = t.data();
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      img.pixels[p * 3 + c] = static_cast<float>(d[(index * 3 + c) * plane + p]);
    }
  return img;
}

template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& x, std::size_t multiple) {
  DLEN_REQUIRE(x.rank() == 4 && multiple > 0, "pad_to_multiple expects NCHW input");
  Tensor<T> out = x;
  const std::size_t h = x.dim(2), w = x.dim(3);
  DLEN_REQUIRE((h >= 2 || h % multiple == 0) && (w >= 2 || w % multiple == 0),
               "image too small to reflect-pad: " + shape_str(x.shape()));
  std::size_t need_h = (multiple - h % multiple) % multiple;
  std::size_t need_w = (multiple - w % multiple) % multiple;
  // Reflection can add at most extent - 1 per pass.
  while (need_h || need_w) {
    const std::size_t ph = std::min(need_h, out.dim(2) - 1);
    const std::size_t pw = std::min(need_w, out.dim(3) - 1);
    out = pad_reflect(out, 0, ph, 0, pw);
    need_h -= ph;
    need_w -= pw;
  }
  return out;
}

template Tensor<float> to_tensor(const std::vector<ImageBuffer>&);
template Tensor<double> to_tensor(const std::vector<ImageBuffer>&);
template ImageBuffer from_tensor(const Tensor<float>&, std::size_t);
template ImageBuffer from_tensor(const Tensor<double>&, std::size_t);
template Tensor<float> pad_to_multiple(const Tensor<float>&, std::size_t);
template Tensor<double> pad_to_multiple(const Tensor<double>&, std::size_t);

}  // namespace dlen
