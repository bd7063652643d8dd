#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shredder/hash.hpp"
#include "shredder/tensor.hpp"

namespace shredder {

struct LaplaceParams {
  double location = 0.0;
  double scale = 1.0;  // > 0

  friend bool operator==(const LaplaceParams&, const LaplaceParams&) = default;
};

// Maximum-likelihood Laplace fit: location is the median, scale the mean
// absolute deviation from it. Throws NumericError on a constant tensor.
LaplaceParams fit_laplace(std::span<const float> values);
inline LaplaceParams fit_laplace(const Tensor& noise) { return fit_laplace(noise.values()); }

// Density-normalized equal-width histograms over the data's [min, max]
// range; returns sum over bins of (observed - fitted)^2.
double histogram_sse(std::span<const float> values, const LaplaceParams& params, std::size_t bins = 50);
inline double histogram_sse(const Tensor& noise, const LaplaceParams& params, std::size_t bins = 50) {
  return histogram_sse(noise.values(), params, bins);
}

// Flat indices sorted by descending value; ties keep the lower index first.
std::vector<std::uint32_t> descending_order(std::span<const float> values);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// 95% Wilson score interval for `successes` out of `trials`.
Interval wilson_interval(std::size_t successes, std::size_t trials);

struct DistributionEntry {
  LaplaceParams params;
  std::vector<std::uint32_t> order;
  double accuracy = 0.0;
  double sse = 0.0;
  // Not persisted in the collection file.
  std::uint64_t seed = 0;
  Interval accuracy_ci;

  // Equality over the persisted fields.
  bool same_persisted(const DistributionEntry& other) const;
};

struct CollectorConfig {
  double sse_threshold = 0.05;
  std::size_t bins = 50;
};

struct CollectOutcome {
  std::optional<DistributionEntry> entry;  // set on acceptance
  LaplaceParams params;
  double sse = 0.0;
  std::string rejection;  // empty on acceptance
};

// Fits, gates on SSE and keeps only (params, order, accuracy). The raw noise
// values are not retained.
CollectOutcome try_collect(const Tensor& noise, double accuracy, const CollectorConfig& config,
                           std::uint64_t seed = 0, Interval accuracy_ci = {});

class DistributionCollection {
 public:
  DistributionCollection() = default;
  DistributionCollection(Shape noise_shape, Digest network_hash, std::uint32_t cut);

  const Shape& noise_shape() const noexcept { return noise_shape_; }
  const Digest& network_hash() const noexcept { return network_hash_; }
  std::uint32_t cut() const noexcept { return cut_; }
  const std::vector<DistributionEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  // Validates the order permutation against the noise shape.
  void append(DistributionEntry entry);

  bool same_persisted(const DistributionCollection& other) const;

 private:
  Shape noise_shape_;
  Digest network_hash_{};
  std::uint32_t cut_ = 0;
  std::vector<DistributionEntry> entries_;
};

// "SHRC" | 0x01 | network hash (32) | cut u32 | rank u8 + extents u32 |
// entry count u16 | per entry: location f64, scale f64, accuracy f64,
// sse f64, order u32 x P.
std::vector<std::uint8_t> encode_collection(const DistributionCollection& collection);
DistributionCollection decode_collection(std::span<const std::uint8_t> bytes);
void save_collection(const std::filesystem::path& path, const DistributionCollection& collection);
DistributionCollection load_collection(const std::filesystem::path& path);
// Refuses collections learned for a different network or cut.
DistributionCollection load_collection(const std::filesystem::path& path, const Digest& expected_network,
                                       std::size_t expected_cut);

}  // namespace shredder
