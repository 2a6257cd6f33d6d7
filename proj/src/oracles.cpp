#include "dlen/oracles.hpp"

#include "dlen/metrics.hpp"

namespace dlen::oracle {

double ssim_windowed(const ImageBuffer& a, const ImageBuffer& b, double range) {
  const auto w = ssim_window_weights();
  const std::size_t k = 11;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y0 = 0; y0 + k <= a.height; ++y0)
      for (std::size_t x0 = 0; x0 + k <= a.width; ++x0) {
        double ma = 0.0, mb = 0.0;
        for (std::size_t y = 0; y < k; ++y)
          for (std::size_t x = 0; x < k; ++x) {
            ma += w[y * k + x] * a.at(y0 + y, x0 + x, c);
            mb += w[y * k + x] * b.at(y0 + y, x0 + x, c);
          }
        double va = 0.0, vb = 0.0, cov = 0.0;
        for (std::size_t y = 0; y < k; ++y)
          for (std::size_t x = 0; x < k; ++x) {
            const double da = a.at(y0 + y, x0 + x, c) - ma, db = b.at(y0 + y, x0 + x, c) - mb;
            va += w[y * k + x] * da * da;
            vb += w[y * k + x] * db * db;
            cov += w[y * k + x] * da * db;
          }
        total += ssim_formula(ma, mb, va, vb, cov, range);
        ++count;
      }
  return total / static_cast<double>(count);
}

double mse(const ImageBuffer& a, const ImageBuffer& b) {
  double s = 0.0;
  for (std::size_t y = 0; y < a.height; ++y)
    for (std::size_t x = 0; x < a.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double d = static_cast<double>(a.at(y, x, c)) - b.at(y, x, c);
        s += d * d;
      }
  return s / static_cast<double>(a.width * a.height * 3);
}

std::vector<double> channel_mean(const Tensor<double>& image) {
  const std::size_t n = image.dim(0), c = image.dim(1), h = image.dim(2), w = image.dim(3);
  std::vector<double> out(n * h * w, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double s = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) s += image.at({b, ch, y, x});
        out[(b * h + y) * w + x] = s / static_cast<double>(c);
      }
  return out;
}

std::vector<double> conv2d(const Tensor<double>& x, const Tensor<double>& w, std::size_t stride,
                           std::size_t pad, std::size_t groups) {
  const std::size_t n = x.dim(0), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0), cig = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const std::size_t ho = (h + 2 * pad - kh) / stride + 1, wo = (wd + 2 * pad - kw) / stride + 1;
  const std::size_t cog = cout / groups;
  std::vector<double> out(n * cout * ho * wo, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oc = 0; oc < cout; ++oc)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          double acc = 0.0;
          for (std::size_t icg = 0; icg < cig; ++icg)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd))
                  continue;
                const std::size_t ic = (oc / cog) * cig + icg;
                acc += x.at({b, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)}) *
                       w.at({oc, icg, ky, kx});
              }
          out[((b * cout + oc) * ho + oy) * wo + ox] = acc;
        }
  return out;
}

}  // namespace dlen::oracle
