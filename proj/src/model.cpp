#include "dlen/model.hpp"

#include <cmath>

#include "dlen/prng.hpp"

namespace dlen {

std::uint32_t default_seb_width(std::uint32_t width) {
  const double half = width / 2.0;
  const auto even = static_cast<std::uint32_t>(2.0 * std::round(half / 2.0));
  return even < 2 ? 2 : even;
}

void DlenConfig::validate() const {
  DLEN_REQUIRE(width > 0 && seb_width > 0, "config: widths must be positive");
  DLEN_REQUIRE(ffn_expansion > 0, "config: ffn expansion must be positive");
  DLEN_REQUIRE(train_height > 0 && train_width > 0 && train_height % 8 == 0 &&
                   train_width % 8 == 0,
               "config: training resolution must be a positive multiple of 8");
  for (std::size_t l = 0; l < 3; ++l) {
    const std::uint32_t c = width << l;
    DLEN_REQUIRE(ilb_heads[l] > 0 && c % ilb_heads[l] == 0,
                 "config: ILB width " + std::to_string(c) + " not divisible by " +
                     std::to_string(ilb_heads[l]) + " heads");
  }
  if (!use_seab) return;
  for (std::size_t l = 0; l < 4; ++l) {
    const std::uint32_t c = seb_width << l;
    DLEN_REQUIRE(seb_heads[l] > 0 && c % seb_heads[l] == 0,
                 "config: SEB width " + std::to_string(c) + " not divisible by " +
                     std::to_string(seb_heads[l]) + " heads");
  }
}

template <typename T>
DlenModel<T>::DlenModel(const DlenConfig& cfg) : config(cfg) {
  cfg.validate();
  const std::size_t c = cfg.width, e = cfg.ffn_expansion;
  lcp = LcpParams<T>(c);
  if (cfg.use_lwn) lwn = LwnParams<T>(c);
  ilb = IlbParams<T>(c, {cfg.ilb_blocks[0], cfg.ilb_blocks[1], cfg.ilb_blocks[2]},
                     {cfg.ilb_heads[0], cfg.ilb_heads[1], cfg.ilb_heads[2]}, e, cfg.train_height,
                     cfg.train_width);
  if (cfg.use_seab) {
    seb = SebParams<T>(cfg.seb_width,
                       {cfg.seb_blocks[0], cfg.seb_blocks[1], cfg.seb_blocks[2], cfg.seb_blocks[3]},
                       {cfg.seb_heads[0], cfg.seb_heads[1], cfg.seb_heads[2], cfg.seb_heads[3]},
                       cfg.refine_blocks, e);
  }
  visit([](const std::string&, Tensor<T>& t, const InitSpec&) { t.set_requires_grad(true); });
}

template <typename T>
std::vector<NamedParam<T>> DlenModel<T>::parameters() {
  std::vector<NamedParam<T>> out;
  visit([&](const std::string& name, Tensor<T>& t, const InitSpec& init) {
    out.push_back({name, t, init});
  });
  return out;
}

template <typename T>
std::vector<Tensor<T>> DlenModel<T>::parameter_tensors() {
  std::vector<Tensor<T>> out;
  visit([&](const std::string&, Tensor<T>& t, const InitSpec&) { out.push_back(t); });
  return out;
}

template <typename T>
std::size_t DlenModel<T>::parameter_count() {
  std::size_t n = 0;
  visit([&](const std::string&, Tensor<T>& t, const InitSpec&) { n += t.numel(); });
  return n;
}

template <typename T>
DlenModel<T> init_params(const DlenConfig& config, std::uint64_t seed) {
  DlenModel<T> model(config);
  Prng rng(seed);
  const T r = static_cast<T>(1.0 / std::sqrt(2.0));
  model.visit([&](const std::string&, Tensor<T>& t, const InitSpec& init) {
    auto v = t.mutable_data();
    switch (init.kind) {
      case InitKind::fan_in_normal: {
        const double sd = 1.0 / std::sqrt(static_cast<double>(init.fan_in));
        for (auto& x : v) x = static_cast<T>(sd * rng.normal());
        break;
      }
      case InitKind::zeros:
        std::fill(v.begin(), v.end(), T(0));
        break;
      case InitKind::ones:
        std::fill(v.begin(), v.end(), T(1));
        break;
      case InitKind::haar_low:
        v[0] = r;
        v[1] = r;
        break;
      case InitKind::haar_high:
        v[0] = r;
        v[1] = -r;
        break;
    }
  });
  return model;
}

template <typename T>
EnhancedOutput<T> dlen_forward(const Tensor<T>& image, const DlenModel<T>& model) {
  DLEN_REQUIRE(image.rank() == 4 && image.dim(1) == 3,
               "dlen_forward expects [N, 3, H, W], got " + shape_str(image.shape()));
  DLEN_REQUIRE(image.dim(2) % 8 == 0 && image.dim(3) % 8 == 0,
               "dlen_forward needs H, W divisible by 8, got " + shape_str(image.shape()));
  EnhancedOutput<T> out;
  auto lit = lcp_forward(image, illumination_prior(image), model.lcp);
  out.i_lu = lit.i_lu;
  out.l_tilde = lit.l_tilde;
  out.f_lu = model.lwn ? lwn_forward(lit.f_lu, *model.lwn) : lit.f_lu;
  out.i_flb = ilb_forward(out.i_lu, out.f_lu, model.ilb);
  out.i_en = out.i_lu + out.i_flb;
  if (model.seb) {
    out.i_feb = seb_forward(out.i_lu, *model.seb);
    out.i_en = out.i_en + out.i_feb;
  }
  return out;
}

template <typename T>
Tensor<T> mae_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  DLEN_REQUIRE(pred.shape() == target.shape(), "mae_loss: shapes " + shape_str(pred.shape()) +
                                                   " and " + shape_str(target.shape()) +
                                                   " differ");
  return mul_scalar(sum(abs(pred - target)), static_cast<T>(1.0 / pred.numel()));
}

template <typename T>
Trainer<T>::Trainer(DlenModel<T>& model, AdamOptions options)
    : model_(model), named_(model.parameters()) {
  for (auto& p : named_) params_.push_back(p.tensor);
  state_ = AdamState<T>(params_, options);
}

template <typename T>
double Trainer<T>::step(const Tensor<T>& low, const Tensor<T>& high) {
  auto check_params = [&] {
    for (auto& p : named_) check_finite(p.tensor.data(), "parameter " + p.name);
  };
  EnhancedOutput<T> out;
  Tensor<T> loss;
  try {
    out = dlen_forward(low, model_);
    loss = mae_loss(out.i_en, high);
  } catch (const NonFiniteError&) {
    check_params();
    throw;
  }
  const double value = static_cast<double>(loss.item());
  if (!std::isfinite(value)) {
    check_params();
    check_finite(out.i_lu.data(), "activation I_lu");
    check_finite(out.f_lu.data(), "activation F_lu");
    check_finite(out.i_flb.data(), "activation I_flb");
    if (out.i_feb.defined()) check_finite(out.i_feb.data(), "activation I_feb");
    throw NonFiniteError("training loss is not finite");
  }
  backward(loss);
  for (auto& p : named_) {
    if (p.tensor.has_grad()) check_finite(p.tensor.grad(), "gradient of " + p.name);
  }
  adam_step<T>(params_, state_);
  for (auto& p : params_) p.zero_grad();
  return value;
}

#define DLEN_INSTANTIATE(T)                                                              \
  template struct DlenModel<T>;                                                          \
  template DlenModel<T> init_params(const DlenConfig&, std::uint64_t);                   \
  template EnhancedOutput<T> dlen_forward(const Tensor<T>&, const DlenModel<T>&);        \
  template Tensor<T> mae_loss(const Tensor<T>&, const Tensor<T>&);                       \
  template class Trainer<T>;

DLEN_INSTANTIATE(float)
DLEN_INSTANTIATE(double)

}  // namespace dlen
