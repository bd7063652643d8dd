#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "shredder/dataset.hpp"
#include "shredder/network.hpp"

namespace shredder {

// Plain minibatch SGD with momentum for fitting a classifier from scratch.
// Used to produce pretrained weights; the noise learner never calls it.
struct ClassifierTrainConfig {
  std::size_t epochs = 4;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
  // When noise_scale > 0, Laplace(0, u * noise_scale * rms(a)) noise with
  // u ~ U(0, 1) is added to the input `a` of layer `noise_cut` on every
  // training sample.
  std::size_t noise_cut = 0;
  double noise_scale = 0.0;
};

// He-uniform weights and zero biases for every conv2d/fc layer of `spec`.
Weights init_weights(const NetworkSpec& spec, std::uint64_t seed);

// Labels are taken from `labels` (primary or private). Inputs must match
// the spec's input shape. `on_epoch(epoch, mean_loss)` is optional.
Weights train_classifier(const NetworkSpec& spec, Weights initial, const std::vector<Tensor>& inputs,
                         const std::vector<std::uint32_t>& labels, const ClassifierTrainConfig& config,
                         const std::function<void(std::size_t, double)>& on_epoch = {});

double accuracy(const Network& network, const std::vector<Tensor>& inputs, const std::vector<std::uint32_t>& labels);

}  // namespace shredder
