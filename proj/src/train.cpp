#include "dlen/train.hpp"

#include <numeric>

namespace dlen {

BatchSampler::BatchSampler(const std::vector<ImagePair>& pairs, const TrainOptions& options)
    : pairs_(pairs), options_(options), rng_(mix_seed(options.seed, 1)), order_(pairs.size()) {
  DLEN_REQUIRE(!pairs.empty(), "training needs at least one image pair");
  DLEN_REQUIRE(options.batch > 0 && options.crop > 0, "batch and crop must be positive");
  cursor_ = order_.size();
}

ImagePair BatchSampler::next_pair() {
  if (cursor_ == order_.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
    cursor_ = 0;
  }
  auto pair = random_crop_pair(pairs_[order_[cursor_++]], options_.crop, rng_);
  return options_.augment ? augment_pair(pair, rng_) : pair;
}

std::pair<Tensor<float>, Tensor<float>> BatchSampler::next_batch() {
  std::vector<ImageBuffer> low, high;
  for (std::size_t b = 0; b < options_.batch; ++b) {
    auto p = next_pair();
    low.push_back(std::move(p.low));
    high.push_back(std::move(p.high));
  }
  return {pad_to_multiple(to_tensor<float>(low), 8), pad_to_multiple(to_tensor<float>(high), 8)};
}

void train_model(DlenModel<float>& model, const std::vector<ImagePair>& pairs,
                 const TrainOptions& options,
                 const std::function<void(std::size_t, double)>& on_step) {
  if (options.iters == 0) return;
  BatchSampler sampler(pairs, options);
  Trainer<float> trainer(model, options.adam);
  for (std::size_t it = 0; it < options.iters; ++it) {
    auto [low, high] = sampler.next_batch();
    const double loss = trainer.step(low, high);
    if (on_step) on_step(it, loss);
  }
}

EnhancedOutput<float> enhance_image(const DlenModel<float>& model, const ImageBuffer& image) {
  NoGradGuard no_grad;
  auto x = to_tensor<float>({image});
  auto out = dlen_forward(pad_to_multiple(x, 8), model);
  const std::size_t h = image.height, w = image.width;
  auto unpad = [&](Tensor<float>& t) {
    if (t.defined() && (t.dim(2) != h || t.dim(3) != w)) t = slice(slice(t, 2, 0, h), 3, 0, w);
  };
  unpad(out.i_en);
  unpad(out.i_lu);
  unpad(out.i_flb);
  unpad(out.i_feb);
  unpad(out.l_tilde);
  unpad(out.f_lu);
  return out;
}

}  // namespace dlen
