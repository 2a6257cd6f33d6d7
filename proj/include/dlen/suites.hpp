#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dlen {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// Runs `body`, which returns (pass, detail); exceptions count as failures.
CheckResult run_check(const std::string& name,
                      const std::function<std::pair<bool, std::string>()>& body);

CheckResult check_wavelet_reconstruction(std::uint64_t seed);
CheckResult check_subband_energy(std::uint64_t seed);
// 64-bit backward vs central differences for each building block and a tiny model.
std::vector<CheckResult> gradient_checks(std::uint64_t seed);
CheckResult check_init_identity(std::uint64_t seed);
CheckResult check_metric_oracles(std::uint64_t seed);
CheckResult check_shapes(std::uint64_t seed);
// Two short in-memory training runs must give identical checkpoint bytes and outputs.
CheckResult check_determinism(std::uint64_t seed);

struct OverfitOptions {
  std::size_t width = 16;
  std::size_t pairs = 4;
  std::size_t size = 128;
  std::size_t iters = 200;
  double lr = 2e-4;
  std::uint64_t seed = 0;
  std::function<void(std::size_t, double)> on_step;
};

struct OverfitResult {
  double initial_mae = 0.0;
  double final_mae = 0.0;
  double input_psnr = 0.0;
  double output_psnr = 0.0;
};

// Trains on procedurally generated synthetic pairs and measures before/after.
OverfitResult run_overfit(const OverfitOptions& options);

std::vector<CheckResult> selftest_suite(std::uint64_t seed);

}  // namespace dlen
