#include "dlen/suites.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "dlen/checkpoint.hpp"
#include "dlen/gradcheck.hpp"
#include "dlen/metrics.hpp"
#include "dlen/oracles.hpp"
#include "dlen/train.hpp"

namespace dlen {

namespace {

template <typename T>
Tensor<T> uniform(const Shape& shape, Prng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(lo + (hi - lo) * rng.uniform());
  return Tensor<T>::from_data(shape, std::move(v));
}

template <typename T>
double max_diff(std::span<const T> a, std::span<const T> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Moves every parameter off its init so no gradient path is trivially zero.
void perturb(auto& params, Prng& rng, double scale) {
  params.visit("p", [&](const std::string& name, Tensor<double>& t, const InitSpec& init) {
    if (name.ends_with(".h0") || name.ends_with(".h1")) return;
    for (auto& v : t.mutable_data()) {
      const double r = scale * (2.0 * rng.uniform() - 1.0);
      v = init.kind == InitKind::ones ? 1.0 + r : v + r;
    }
  });
}

std::vector<Tensor<double>> tensors_of(auto& params) {
  std::vector<Tensor<double>> out;
  params.visit("p", [&](const std::string&, Tensor<double>& t, const InitSpec&) {
    out.push_back(t);
  });
  return out;
}

DlenConfig tiny_config() {
  DlenConfig c;
  c.width = 4;
  c.seb_width = 4;
  c.ilb_blocks = {1, 1, 1};
  c.seb_blocks = {1, 1, 1, 1};
  c.refine_blocks = 1;
  c.train_height = 8;
  c.train_width = 8;
  return c;
}

std::pair<bool, std::string> below(double value, double limit) {
  return {value < limit, fmt("max error %.3g", value) + fmt(" (limit %.0e)", limit)};
}

}  // namespace

CheckResult run_check(const std::string& name,
                      const std::function<std::pair<bool, std::string>()>& body) {
  CheckResult r;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::tie(r.pass, r.detail) = body();
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

CheckResult check_wavelet_reconstruction(std::uint64_t seed) {
  return run_check("wavelet perfect reconstruction", [&] {
    Prng rng(seed);
    const auto f32 = WaveletFilterPair<float>::haar();
    const auto f64 = WaveletFilterPair<double>::haar();
    double e32 = 0.0, e64 = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Shape s{1 + rng.below(2), 1 + rng.below(4), 2 * (1 + rng.below(16)),
                    2 * (1 + rng.below(16))};
      auto x32 = uniform<float>(s, rng);
      auto x64 = uniform<double>(s, rng);
      e32 = std::max(e32, max_diff<float>(idwt2d(dwt2d(x32, f32), f32).data(), x32.data()));
      e64 = std::max(e64, max_diff<double>(idwt2d(dwt2d(x64, f64), f64).data(), x64.data()));
    }
    return std::pair{e32 < 1e-5 && e64 < 1e-10,
                     fmt("f32 max error %.3g", e32) + fmt(", f64 max error %.3g", e64)};
  });
}

CheckResult check_subband_energy(std::uint64_t seed) {
  return run_check("subband energy conservation", [&] {
    Prng rng(seed);
    const auto f = WaveletFilterPair<double>::haar();
    auto energy = [](const Tensor<double>& t) {
      double e = 0.0;
      for (double v : t.data()) e += v * v;
      return e;
    };
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Shape s{1 + rng.below(2), 1 + rng.below(4), 2 * (1 + rng.below(16)),
                    2 * (1 + rng.below(16))};
      auto x = uniform<double>(s, rng);
      auto b = dwt2d(x, f);
      const double total = energy(x);
      worst = std::max(worst, std::abs(total - energy(b.ll) - energy(b.lh) - energy(b.hl) -
                                       energy(b.hh)) / total);
    }
    return below(worst, 1e-4);
  });
}

std::vector<CheckResult> gradient_checks(std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto op_check = [&](const std::string& name, std::vector<Shape> shapes,
                      std::function<Tensor<double>(const std::vector<Tensor<double>>&)> op) {
    out.push_back(run_check(name, [&] {
      Prng rng(mix_seed(seed, out.size()));
      std::vector<Tensor<double>> inputs;
      for (const auto& s : shapes) inputs.push_back(uniform<double>(s, rng));
      return below(input_gradient_error(op, inputs, seed + 1), 1e-4);
    }));
  };
  using V = std::vector<Tensor<double>>;
  op_check("conv2d", {{2, 4, 6, 5}, {6, 2, 3, 3}, {6}}, [](const V& v) {
    return conv2d(v[0], v[1], v[2], {.stride = 2, .padding = 1, .groups = 2});
  });
  op_check("conv_transpose2d", {{1, 3, 4, 3}, {3, 2, 2, 2}, {2}},
           [](const V& v) { return conv_transpose2d(v[0], v[1], v[2], 2); });
  op_check("matmul", {{2, 3, 4}, {2, 4, 5}}, [](const V& v) { return matmul(v[0], v[1]); });
  op_check("softmax", {{3, 4, 5}}, [](const V& v) { return softmax(v[0], 1); });
  op_check("l2_normalize", {{3, 4, 5}}, [](const V& v) { return l2_normalize(v[0], -1); });
  op_check("layer_norm", {{2, 5, 3, 3}, {5}, {5}},
           [](const V& v) { return layer_norm(v[0], v[1], v[2], 1e-5, 1); });
  op_check("gelu", {{4, 7}}, [](const V& v) { return gelu(v[0]); });

  out.push_back(run_check("ig_attention", [&] {
    Prng rng(mix_seed(seed, 100));
    MiabParams<double> p(4, 2, 2, 4, 4);
    perturb(p, rng, 0.5);
    auto x = uniform<double>({1, 4, 4, 4}, rng), y = uniform<double>({1, 4, 4, 4}, rng);
    auto all = tensors_of(p);
    all.push_back(x);
    all.push_back(y);
    return below(param_gradient_error([&] { return random_projection(ig_attention(x, y, p), 3); },
                                      all, 24, seed),
                 1e-4);
  }));
  out.push_back(run_check("seab_attention", [&] {
    Prng rng(mix_seed(seed, 101));
    SeabParams<double> p(4, 2, 2);
    perturb(p, rng, 0.5);
    auto x = uniform<double>({1, 4, 4, 4}, rng);
    auto all = tensors_of(p);
    all.push_back(x);
    return below(
        param_gradient_error([&] { return random_projection(seab_attention(x, p), 4); }, all, 24,
                             seed),
        1e-4);
  }));
  out.push_back(run_check("lwn_forward", [&] {
    Prng rng(mix_seed(seed, 102));
    LwnParams<double> p(2);
    perturb(p, rng, 0.4);
    p.filters.h0.mutable_data()[0] += 0.05;
    auto x = uniform<double>({1, 2, 5, 6}, rng);
    auto all = tensors_of(p);
    all.push_back(x);
    return below(param_gradient_error([&] { return random_projection(lwn_forward(x, p), 5); },
                                      all, 24, seed),
                 1e-4);
  }));
  out.push_back(run_check("lcp_forward", [&] {
    Prng rng(mix_seed(seed, 103));
    LcpParams<double> p(3);
    perturb(p, rng, 0.5);
    auto x = uniform<double>({1, 3, 6, 6}, rng, 0.0, 1.0);
    auto all = tensors_of(p);
    all.push_back(x);
    auto loss = [&] {
      auto o = lcp_forward(x, illumination_prior(x), p);
      return random_projection(o.i_lu, 6) + random_projection(o.f_lu, 7);
    };
    return below(param_gradient_error(loss, all, 24, seed), 1e-4);
  }));
  out.push_back(run_check("whole model (1x3x8x8, C=4)", [&] {
    Prng rng(mix_seed(seed, 104));
    auto m = init_params<double>(tiny_config(), seed);
    m.visit([&](const std::string& name, Tensor<double>& t, const InitSpec& init) {
      if (name.ends_with(".h0") || name.ends_with(".h1")) return;
      for (auto& v : t.mutable_data()) {
        const double r = 0.3 * (2.0 * rng.uniform() - 1.0);
        v = init.kind == InitKind::ones ? 1.0 + r : v + r;
      }
    });
    auto x = uniform<double>({1, 3, 8, 8}, rng, 0.0, 1.0);
    auto loss = [&] { return random_projection(dlen_forward(x, m).i_en, 8); };
    return below(param_gradient_error(loss, m.parameter_tensors(), 6, seed, 1e-4), 1e-3);
  }));
  return out;
}

CheckResult check_init_identity(std::uint64_t seed) {
  return run_check("init no-op identity", [&] {
    DlenConfig cfg;
    cfg.train_height = cfg.train_width = 32;
    auto m = init_params<float>(cfg, seed);
    Prng rng(mix_seed(seed, 7));
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      const std::size_t h = 8 * (1 + rng.below(4)), w = 8 * (1 + rng.below(4));
      NoGradGuard ng;
      auto out = dlen_forward(uniform<float>({1, 3, h, w}, rng, 0.0, 1.0), m);
      worst = std::max(worst, max_diff<float>(out.i_en.data(), out.i_lu.data()));
    }
    return std::pair{worst == 0.0, fmt("max |I_en - I_lu| = %.3g over 10 inputs", worst)};
  });
}

CheckResult check_metric_oracles(std::uint64_t seed) {
  return run_check("metric oracles", [&] {
    Prng rng(seed);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      ImageBuffer a(16, 16), b(16, 16);
      for (auto& v : a.pixels) v = static_cast<float>(rng.uniform());
      for (std::size_t k = 0; k < b.pixels.size(); ++k) {
        b.pixels[k] = static_cast<float>(std::clamp(a.pixels[k] + 0.3 * (rng.uniform() - 0.5), 0.0, 1.0));
      }
      worst = std::max(worst, std::abs(ssim_windowed(a, b) - oracle::ssim_windowed(a, b)));
    }
    const double p0 = psnr_from_mse(1.0, 1.0), p20 = psnr_from_mse(0.01, 1.0);
    const double p0r = psnr_from_mse(4.0, 2.0);
    ImageBuffer c(4, 4), d(4, 4);
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x)
        for (std::size_t ch = 0; ch < 3; ++ch) {
          c.at(y, x, ch) = static_cast<float>((x + y) % 2);
          d.at(y, x, ch) = 1.0f - c.at(y, x, ch);
        }
    const double anti = ssim_global(c, d);
    const bool pass = worst < 1e-6 && std::abs(p0) < 1e-9 && std::abs(p0r) < 1e-9 &&
                      std::abs(p20 - 20.0) < 1e-9 && std::abs(anti + 0.9964) < 1e-3;
    return std::pair{pass, fmt("ssim window error %.3g", worst) + fmt(", psnr(MSE=R^2) %.3g", p0) +
                               fmt(", psnr(0.01) %.12g", p20) + fmt(", anti-correlated ssim %.6f", anti)};
  });
}

CheckResult check_shapes(std::uint64_t seed) {
  return run_check("shape and latent contracts", [&] {
    DlenConfig cfg;
    cfg.width = 8;
    cfg.seb_width = 4;
    cfg.train_height = cfg.train_width = 16;
    auto m = init_params<float>(cfg, seed);
    Prng rng(mix_seed(seed, 9));
    std::string detail;
    bool pass = true;
    for (std::size_t s : {16, 24, 32}) {
      NoGradGuard ng;
      auto x = uniform<float>({2, 3, s, s}, rng, 0.0, 1.0);
      SebTrace<float> trace;
      seb_forward(x, *m.seb, &trace);
      const Shape latent{2, 8 * cfg.seb_width, s / 8, s / 8};
      auto out = dlen_forward(x, m);
      for (const auto* t : {&out.i_en, &out.i_lu, &out.i_flb, &out.i_feb, &out.l_tilde}) {
        pass &= t->shape() == x.shape();
      }
      pass &= trace.latent.shape() == latent;
      detail += "latent(" + std::to_string(s) + ")=" + shape_str(trace.latent.shape()) + " ";
    }
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{13, 21}, {30, 9}, {5, 3}}) {
      ImageBuffer img(w, h);
      for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
      auto out = enhance_image(m, img);
      pass &= out.i_en.dim(2) == h && out.i_en.dim(3) == w;
      detail += std::to_string(h) + "x" + std::to_string(w) + "->" +
                std::to_string(out.i_en.dim(2)) + "x" + std::to_string(out.i_en.dim(3)) + " ";
    }
    return std::pair{pass, detail};
  });
}

CheckResult check_determinism(std::uint64_t seed) {
  return run_check("training determinism", [&] {
    std::vector<ImagePair> pairs;
    for (std::uint64_t i = 0; i < 3; ++i) {
      auto high = procedural_image(24, 24, mix_seed(seed, 20 + i));
      pairs.push_back({synth_lowlight(high, 2.0, 0.4, 0.02, mix_seed(seed, 30 + i)), high});
    }
    TrainOptions opt;
    opt.iters = 3;
    opt.batch = 2;
    opt.crop = 16;
    opt.seed = seed;
    DlenConfig cfg = tiny_config();
    cfg.train_height = cfg.train_width = 16;
    auto run = [&] {
      auto m = init_params<float>(cfg, seed);
      train_model(m, pairs, opt);
      auto bytes = serialize_checkpoint(m);
      auto out = enhance_image(m, pairs[0].low).i_en;
      std::vector<float> v(out.data().begin(), out.data().end());
      return std::pair{bytes, v};
    };
    const auto a = run(), b = run();
    const bool pass = a.first == b.first && a.second == b.second;
    return std::pair{pass, std::to_string(a.first.size()) + " checkpoint bytes, " +
                               (pass ? "identical" : "different")};
  });
}

OverfitResult run_overfit(const OverfitOptions& o) {
  std::vector<ImagePair> pairs;
  for (std::uint64_t i = 0; i < o.pairs; ++i) {
    auto high = procedural_image(o.size, o.size, mix_seed(o.seed, 100 + i));
    pairs.push_back({synth_lowlight(high, 2.0, 0.4, 0.02, mix_seed(o.seed, 200 + i)), high});
  }
  DlenConfig cfg;
  cfg.width = static_cast<std::uint32_t>(o.width);
  cfg.seb_width = default_seb_width(cfg.width);
  cfg.train_height = cfg.train_width = static_cast<std::uint32_t>(o.size);
  auto model = init_params<float>(cfg, o.seed);

  auto evaluate = [&](double& mae_mean, double& psnr_in, double& psnr_out) {
    mae_mean = psnr_in = psnr_out = 0.0;
    for (const auto& p : pairs) {
      auto out = enhance_image(model, p.low);
      auto pred = from_tensor(out.i_en);
      mae_mean += mae_loss(out.i_en, to_tensor<float>({p.high})).item() / pairs.size();
      for (auto& v : pred.pixels) v = std::clamp(v, 0.0f, 1.0f);
      psnr_in += psnr(p.low, p.high) / pairs.size();
      psnr_out += psnr(pred, p.high) / pairs.size();
    }
  };
  OverfitResult r;
  double unused_in, unused_out;
  evaluate(r.initial_mae, unused_in, unused_out);
  TrainOptions t;
  t.iters = o.iters;
  t.batch = o.pairs;
  t.crop = o.size;
  t.seed = o.seed;
  t.augment = false;
  t.adam.lr = o.lr;
  train_model(model, pairs, t, o.on_step);
  evaluate(r.final_mae, r.input_psnr, r.output_psnr);
  return r;
}

std::vector<CheckResult> selftest_suite(std::uint64_t seed) {
  return {check_wavelet_reconstruction(seed), check_subband_energy(seed),
          check_metric_oracles(seed), check_init_identity(seed), check_determinism(seed),
          check_shapes(seed)};
}

}  // namespace dlen
