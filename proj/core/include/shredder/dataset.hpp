#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "shredder/tensor.hpp"

namespace shredder {

// Images as [1, rows, cols] tensors scaled to [0, 1], with a primary label
// and an optional private label per sample.
struct Dataset {
  std::vector<Tensor> inputs;
  std::vector<std::uint32_t> labels;
  std::vector<std::uint32_t> private_labels;

  std::size_t size() const noexcept { return inputs.size(); }
  bool has_private_labels() const noexcept { return !private_labels.empty(); }
  Dataset subset(std::span<const std::size_t> indices) const;
  Dataset head(std::size_t count) const;
  std::size_t class_count() const;
  std::size_t private_class_count() const;
};

// IDX (MNIST-compatible) files: big-endian header, u8 payload.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const std::optional<std::filesystem::path>& private_labels = std::nullopt);
void save_idx(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels,
              const std::optional<std::filesystem::path>& private_labels = std::nullopt);

struct HoldoutSplit {
  Dataset train;
  Dataset holdout;
};

// Deterministic shuffle by `seed`, then the first ceil(fraction * N) samples
// become the hold-out set. The two parts are disjoint.
HoldoutSplit split_holdout(const Dataset& data, double fraction, std::uint64_t seed);

struct SyntheticDigitsConfig {
  std::size_t count = 10000;
  std::uint64_t seed = 1;
  std::size_t image_size = 28;
  double pixel_noise = 0.05;
};

// Procedural handwritten-style digits 0-9 with random affine distortion.
// The private label is the stroke-thickness class (0 thin, 1 medium, 2 thick).
Dataset generate_digits(const SyntheticDigitsConfig& config);

}  // namespace shredder
