#include "dlen/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "dlen/error.hpp"

namespace dlen {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

void require_same(const ImageBuffer& a, const ImageBuffer& b, const char* op) {
  DLEN_REQUIRE(a.width == b.width && a.height == b.height,
               std::string(op) + ": images differ in size (" + std::to_string(a.width) + "x" +
                   std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                   std::to_string(b.height) + ")");
}

// Valid-mode separable filtering of one channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
  const std::size_t ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> rows(h * ow, 0.0), out(oh * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * plane[y * w + x + k];
      rows[y * ow + x] = s;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

std::vector<double> gaussian_1d() {
  std::vector<double> g(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

}  // namespace

double mse(const ImageBuffer& a, const ImageBuffer& b) {
  require_same(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    s += d * d;
  }
  return s / static_cast<double>(a.pixels.size());
}

double psnr_from_mse(double mse_value, double range) {
  DLEN_REQUIRE(range > 0.0, "psnr: dynamic range must be positive");
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(range * range / mse_value);
}

double psnr(const ImageBuffer& a, const ImageBuffer& b, double range) {
  DLEN_REQUIRE(range > 0.0, "psnr: dynamic range must be positive");
  return psnr_from_mse(mse(a, b), range);
}

double ssim_formula(double mu_a, double mu_b, double var_a, double var_b, double cov,
                    double range) {
  const double c1 = (0.01 * range) * (0.01 * range), c2 = (0.03 * range) * (0.03 * range);
  return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

double ssim_global(const ImageBuffer& a, const ImageBuffer& b, double range) {
  require_same(a, b, "ssim_global");
  DLEN_REQUIRE(range > 0.0, "ssim: dynamic range must be positive");
  const std::size_t n = a.width * a.height;
  DLEN_REQUIRE(n > 0, "ssim_global: empty image");
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      ma += a.pixels[p * 3 + c];
      mb += b.pixels[p * 3 + c];
    }
    ma /= n;
    mb /= n;
    double va = 0.0, vb = 0.0, cov = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double da = a.pixels[p * 3 + c] - ma, db = b.pixels[p * 3 + c] - mb;
      va += da * da;
      vb += db * db;
      cov += da * db;
    }
    total += ssim_formula(ma, mb, va / n, vb / n, cov / n, range);
  }
  return total / 3.0;
}

std::vector<double> ssim_window_weights() {
  const auto g = gaussian_1d();
  std::vector<double> w(kWindow * kWindow);
  for (int y = 0; y < kWindow; ++y)
    for (int x = 0; x < kWindow; ++x) w[y * kWindow + x] = g[y] * g[x];
  return w;
}

double ssim_windowed(const ImageBuffer& a, const ImageBuffer& b, double range) {
  require_same(a, b, "ssim_windowed");
  DLEN_REQUIRE(range > 0.0, "ssim: dynamic range must be positive");
  DLEN_REQUIRE(a.width >= kWindow && a.height >= kWindow,
               "ssim_windowed: image smaller than the 11x11 window");
  const std::size_t h = a.height, w = a.width, n = h * w;
  const auto g = gaussian_1d();
  double total = 0.0;
  std::size_t windows = 0;
  std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < n; ++p) {
      pa[p] = a.pixels[p * 3 + c];
      pb[p] = b.pixels[p * 3 + c];
      paa[p] = pa[p] * pa[p];
      pbb[p] = pb[p] * pb[p];
      pab[p] = pa[p] * pb[p];
    }
    const auto ma = filter_valid(pa, h, w, g), mb = filter_valid(pb, h, w, g);
    const auto saa = filter_valid(paa, h, w, g), sbb = filter_valid(pbb, h, w, g);
    const auto sab = filter_valid(pab, h, w, g);
    for (std::size_t i = 0; i < ma.size(); ++i) {
      total += ssim_formula(ma[i], mb[i], saa[i] - ma[i] * ma[i], sbb[i] - mb[i] * mb[i],
                            sab[i] - ma[i] * mb[i], range);
    }
    windows += ma.size();
  }
  return total / static_cast<double>(windows);
}

void MetricReport::add(const std::string& name, const ImageBuffer& pred,
                       const ImageBuffer& target) {
  const double s = ssim_kind == SsimKind::windowed ? ssim_windowed(pred, target)
                                                   : ssim_global(pred, target);
  rows.push_back({name, psnr(pred, target), s});
}

double MetricReport::mean_psnr() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.psnr_db;
  return s / rows.size();
}

double MetricReport::mean_ssim() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.ssim;
  return s / rows.size();
}

std::string format_metric(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

std::string MetricReport::to_tsv() const {
  std::string out = "name\tpsnr_db\tssim\n";
  for (const auto& r : rows) {
    out += r.name + "\t" + format_metric(r.psnr_db) + "\t" + format_metric(r.ssim) + "\n";
  }
  out += "MEAN\t" + format_metric(mean_psnr()) + "\t" + format_metric(mean_ssim()) + "\n";
  return out;
}

std::string MetricReport::to_kv() const {
  return "count=" + std::to_string(count()) + "\nmean_psnr_db=" + format_metric(mean_psnr()) +
         "\nmean_ssim=" + format_metric(mean_ssim()) +
         "\nssim_kind=" + (ssim_kind == SsimKind::windowed ? "windowed" : "global") + "\n";
}

}  // namespace dlen
