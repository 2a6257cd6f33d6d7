#pragma once

#include <string>
#include <vector>

#include "dlen/image.hpp"

namespace dlen {

// Mean over pixels and channels of (a - b)^2.
double mse(const ImageBuffer& a, const ImageBuffer& b);
// 10 log10(R^2 / mse); +infinity when mse is zero.
double psnr_from_mse(double mse_value, double range = 1.0);
double psnr(const ImageBuffer& a, const ImageBuffer& b, double range = 1.0);

// Single evaluation of the SSIM formula with whole-image statistics per channel,
// averaged over channels. C1 = (0.01 L)^2, C2 = (0.03 L)^2.
double ssim_global(const ImageBuffer& a, const ImageBuffer& b, double range = 1.0);

// SSIM over every valid 11x11 Gaussian window (sigma 1.5), averaged over windows and
// channels.
double ssim_windowed(const ImageBuffer& a, const ImageBuffer& b, double range = 1.0);

// Normalized 11x11 Gaussian weights, row-major.
std::vector<double> ssim_window_weights();

// SSIM from (weighted) statistics.
double ssim_formula(double mu_a, double mu_b, double var_a, double var_b, double cov,
                    double range);

enum class SsimKind { windowed, global };

struct MetricRow {
  std::string name;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  SsimKind ssim_kind = SsimKind::windowed;
  std::vector<MetricRow> rows;

  void add(const std::string& name, const ImageBuffer& pred, const ImageBuffer& target);
  double mean_psnr() const;
  double mean_ssim() const;
  std::size_t count() const { return rows.size(); }

  // "name\tpsnr_db\tssim" header, one row per image, then a MEAN row.
  std::string to_tsv() const;
  // key=value lines: count, mean_psnr_db, mean_ssim, ssim_kind.
  std::string to_kv() const;
};

std::string format_metric(double value);

}  // namespace dlen
