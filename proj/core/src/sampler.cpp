#include "shredder/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "shredder/error.hpp"

namespace shredder {

Tensor place_by_order(std::vector<float> draws, std::span<const std::uint32_t> order, const Shape& shape) {
  if (draws.size() != order.size() || draws.size() != element_count(shape)) {
    throw ShapeError("place_by_order: draw count, order length and shape " + to_string(shape) + " disagree");
  }
  std::sort(draws.begin(), draws.end(), std::greater<>());
  for (std::size_t k = 1; k < draws.size(); ++k) {
    if (!(draws[k] < draws[k - 1])) draws[k] = std::nextafter(draws[k - 1], -std::numeric_limits<float>::infinity());
  }
  Tensor out(shape);
  for (std::size_t k = 0; k < draws.size(); ++k) {
    if (order[k] >= out.size()) throw ShapeError("place_by_order: order index out of range");
    out[order[k]] = draws[k];
  }
  return out;
}

SampledNoise sample_from_entry(const DistributionCollection& collection, std::size_t entry, CounterRng& rng) {
  if (entry >= collection.size()) throw Error("sample_from_entry: entry index out of range");
  const auto& e = collection.entries()[entry];
  SampledNoise out;
  out.entry_index = entry;
  out.draw_counter = rng.counter();
  std::vector<float> draws(e.order.size());
  for (auto& d : draws) d = static_cast<float>(rng.laplace(e.params.location, e.params.scale));
  out.values = place_by_order(std::move(draws), e.order, collection.noise_shape());
  return out;
}

SampledNoise sample_noise(const DistributionCollection& collection, CounterRng& rng) {
  if (collection.empty()) throw Error("sample_noise: empty distribution collection");
  const auto entry = static_cast<std::size_t>(rng.below(collection.size()));
  return sample_from_entry(collection, entry, rng);
}

Tensor add_noise(const Tensor& activation, const SampledNoise& noise) {
  require_same_shape(activation, noise.values, "add_noise");
  return add(activation, noise.values);
}

}  // namespace shredder
