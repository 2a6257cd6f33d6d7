#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dlen/image.hpp"
#include "dlen/model.hpp"

namespace dlen {

struct TrainOptions {
  std::size_t iters = 1000;
  std::size_t batch = 8;
  std::size_t crop = 128;
  std::uint64_t seed = 0;
  AdamOptions adam;
  bool augment = true;
};

// Draws batches from an epoch-wise shuffled order of `pairs`, each pair randomly
// cropped (and augmented), padded to a multiple of 8.
class BatchSampler {
 public:
  BatchSampler(const std::vector<ImagePair>& pairs, const TrainOptions& options);
  ImagePair next_pair();
  std::pair<Tensor<float>, Tensor<float>> next_batch();

 private:
  const std::vector<ImagePair>& pairs_;
  TrainOptions options_;
  Prng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// Calls on_step(iteration, loss) after every update.
void train_model(DlenModel<float>& model, const std::vector<ImagePair>& pairs,
                 const TrainOptions& options,
                 const std::function<void(std::size_t, double)>& on_step = {});

// Runs the model on one image of any size >= 2x2 by reflect-padding to multiples of 8
// and cropping every output back. Values are not clamped.
EnhancedOutput<float> enhance_image(const DlenModel<float>& model, const ImageBuffer& image);

}  // namespace dlen
