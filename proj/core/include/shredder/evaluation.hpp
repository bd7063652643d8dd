#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "shredder/collector.hpp"
#include "shredder/dataset.hpp"
#include "shredder/network.hpp"

namespace shredder {

// Which variable stands in for the input x in I(x; a) and I(x; a').
// `activation` uses the clean activation a = f(x): the noise is independent
// of x, so I(x; a') = I(a; a'). `input` uses the raw pixels.
enum class MIReference { activation, input };

MIReference parse_mi_reference(const std::string& text);
std::string to_string(MIReference reference);

struct EvaluationConfig {
  std::size_t mi_samples = 1000;  // first N test examples feed the estimator
  std::size_t k = 3;
  MIReference reference = MIReference::activation;
  std::uint64_t seed = 7;
  bool zero_noise = false;  // transmit the clean activation
};

struct PrivacyReport {
  double clean_mi_bits = 0.0;  // I(x; a)
  double noisy_mi_bits = 0.0;  // I(x; a')
  double reduction = 0.0;      // 1 - noisy / clean
  double clean_accuracy = 0.0;
  double noisy_accuracy = 0.0;
  std::size_t mi_samples = 0;
  std::size_t accuracy_samples = 0;

  double accuracy_loss() const noexcept { return clean_accuracy - noisy_accuracy; }
};

// Clean and noisy split inference over all of `test`, plus KSG estimates of
// I(x; a) and I(x; a') over its first mi_samples examples. Noise for example
// i comes from the i-th draw of one generator seeded by config.seed.
PrivacyReport evaluate_privacy(const Split& split, const DistributionCollection& collection, const Dataset& test,
                               const EvaluationConfig& config = {});

}  // namespace shredder
