#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "shredder/collector.hpp"
#include "shredder/rng.hpp"
#include "shredder/tensor.hpp"

namespace shredder {

struct SampledNoise {
  Tensor values;
  std::size_t entry_index = 0;
  // Generator counter before the draw; with the generator's seed it
  // reproduces the tensor.
  std::uint64_t draw_counter = 0;
};

// Places draws so that their descending argsort equals `order`: the k-th
// largest draw lands at flat index order[k]. Equal float draws are split by
// one ulp so the ranking is strict.
Tensor place_by_order(std::vector<float> draws, std::span<const std::uint32_t> order, const Shape& shape);

// Fresh order-preserving noise from one entry.
SampledNoise sample_from_entry(const DistributionCollection& collection, std::size_t entry, CounterRng& rng);
// Picks an entry uniformly at random, then samples from it.
SampledNoise sample_noise(const DistributionCollection& collection, CounterRng& rng);

// a + noise, elementwise; the activation is never reordered.
Tensor add_noise(const Tensor& activation, const SampledNoise& noise);

}  // namespace shredder
