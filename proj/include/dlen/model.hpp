#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dlen/adam.hpp"
#include "dlen/ilb.hpp"
#include "dlen/lcp.hpp"
#include "dlen/seb.hpp"
#include "dlen/wavelet.hpp"

namespace dlen {

// C_s default: half the width, rounded to the nearest even number (at least 2).
std::uint32_t default_seb_width(std::uint32_t width);

struct DlenConfig {
  std::uint32_t width = 16;
  std::uint32_t seb_width = 8;
  std::array<std::uint32_t, 3> ilb_blocks{1, 2, 2};  // level 0, level 1, bottleneck
  std::array<std::uint32_t, 3> ilb_heads{1, 2, 4};
  std::array<std::uint32_t, 4> seb_blocks{1, 1, 2, 2};  // three encoder levels + latent
  std::array<std::uint32_t, 4> seb_heads{1, 2, 4, 8};
  std::uint32_t refine_blocks = 2;
  std::uint32_t ffn_expansion = 2;
  bool use_lwn = true;
  bool use_seab = true;
  std::uint32_t train_height = 128;
  std::uint32_t train_width = 128;

  // Throws ContractError describing the first violated constraint.
  void validate() const;
  bool operator==(const DlenConfig&) const = default;
};

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
  InitSpec init;
};

template <typename T>
struct DlenModel {
  DlenConfig config;
  LcpParams<T> lcp;
  std::optional<LwnParams<T>> lwn;
  IlbParams<T> ilb;
  std::optional<SebParams<T>> seb;

  DlenModel() = default;
  // Parameters are allocated with the right shapes but zero-filled; see init_params.
  explicit DlenModel(const DlenConfig& cfg);

  template <typename V>
  void visit(V&& v) {
    lcp.visit("lcp", v);
    if (lwn) lwn->visit("lwn", v);
    ilb.visit("ilb", v);
    if (seb) seb->visit("seb", v);
  }

  // Handles share storage with the model.
  std::vector<NamedParam<T>> parameters();
  std::vector<Tensor<T>> parameter_tensors();
  std::size_t parameter_count();
};

template <typename T>
DlenModel<T> init_params(const DlenConfig& config, std::uint64_t seed);

template <typename T>
struct EnhancedOutput {
  Tensor<T> i_en;
  Tensor<T> i_lu;
  Tensor<T> i_flb;
  Tensor<T> i_feb;  // undefined when the structure branch is ablated
  Tensor<T> l_tilde;
  Tensor<T> f_lu;
};

// I: [N, 3, H, W], H and W divisible by 8. I_en = (I_lu + I_flb) + I_feb.
template <typename T>
EnhancedOutput<T> dlen_forward(const Tensor<T>& image, const DlenModel<T>& model);

template <typename T>
Tensor<T> mae_loss(const Tensor<T>& pred, const Tensor<T>& target);

template <typename T>
class Trainer {
 public:
  Trainer(DlenModel<T>& model, AdamOptions options);

  // Forward, MAE, backward, Adam update, gradients cleared. Returns the loss before the
  // update. Throws NonFiniteError naming the first non-finite activation or parameter.
  double step(const Tensor<T>& low, const Tensor<T>& high);

  const AdamState<T>& state() const { return state_; }

 private:
  DlenModel<T>& model_;
  std::vector<NamedParam<T>> named_;
  std::vector<Tensor<T>> params_;
  AdamState<T> state_;
};

}  // namespace dlen
