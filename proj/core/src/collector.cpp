#include "shredder/collector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "shredder/byte_io.hpp"
#include "shredder/error.hpp"

namespace shredder {

namespace {
constexpr char kCollectionMagic[4] = {'S', 'H', 'R', 'C'};
constexpr std::uint8_t kCollectionVersion = 0x01;

double laplace_cdf(double x, const LaplaceParams& p) {
  const double z = (x - p.location) / p.scale;
  return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
}

bool is_permutation_of_range(std::span<const std::uint32_t> order) {
  std::vector<bool> seen(order.size(), false);
  for (auto i : order) {
    if (i >= order.size() || seen[i]) return false;
    seen[i] = true;
  }
  return true;
}
}  // namespace

LaplaceParams fit_laplace(std::span<const float> values) {
  if (values.size() < 2) throw NumericError("fit_laplace: need at least two values");
  std::vector<double> v(values.begin(), values.end());
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError("fit_laplace: non-finite value");
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  double mad = 0.0;
  for (double x : v) mad += std::fabs(x - median);
  mad /= static_cast<double>(n);
  if (!(mad > 0.0)) throw NumericError("fit_laplace: constant tensor has zero scale");
  return {median, mad};
}

double histogram_sse(std::span<const float> values, const LaplaceParams& params, std::size_t bins) {
  if (bins < 2) throw ConfigError("histogram_sse: need at least two bins");
  if (values.empty()) throw NumericError("histogram_sse: empty data");
  if (!(params.scale > 0.0)) throw NumericError("histogram_sse: scale must be positive");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw NumericError("histogram_sse: data has zero range");
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (float x : values) {
    auto b = static_cast<std::size_t>((x - lo) / width);
    counts[std::min(b, bins - 1)]++;
  }
  const double norm = static_cast<double>(values.size()) * width;
  double sse = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    const double left = lo + width * static_cast<double>(b);
    const double observed = static_cast<double>(counts[b]) / norm;
    const double fitted = (laplace_cdf(left + width, params) - laplace_cdf(left, params)) / width;
    sse += (observed - fitted) * (observed - fitted);
  }
  return sse;
}

std::vector<std::uint32_t> descending_order(std::span<const float> values) {
  if (values.size() > std::numeric_limits<std::uint32_t>::max()) throw Error("descending_order: tensor too large");
  std::vector<std::uint32_t> order(values.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return values[a] > values[b]; });
  return order;
}

Interval wilson_interval(std::size_t successes, std::size_t trials) {
  if (trials == 0) throw NumericError("wilson_interval: zero trials");
  constexpr double z = 1.959963984540054;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

bool DistributionEntry::same_persisted(const DistributionEntry& other) const {
  return params == other.params && order == other.order && accuracy == other.accuracy && sse == other.sse;
}

CollectOutcome try_collect(const Tensor& noise, double accuracy, const CollectorConfig& config, std::uint64_t seed,
                           Interval accuracy_ci) {
  CollectOutcome out;
  out.params = fit_laplace(noise);
  out.sse = histogram_sse(noise, out.params, config.bins);
  if (!(out.sse < config.sse_threshold)) {
    out.rejection = "histogram SSE " + std::to_string(out.sse) + " >= threshold " + std::to_string(config.sse_threshold);
    return out;
  }
  DistributionEntry e;
  e.params = out.params;
  e.order = descending_order(noise.values());
  e.accuracy = accuracy;
  e.sse = out.sse;
  e.seed = seed;
  e.accuracy_ci = accuracy_ci;
  out.entry = std::move(e);
  return out;
}

DistributionCollection::DistributionCollection(Shape noise_shape, Digest network_hash, std::uint32_t cut)
    : noise_shape_(std::move(noise_shape)), network_hash_(network_hash), cut_(cut) {
  if (element_count(noise_shape_) == 0) throw ShapeError("collection: empty noise shape");
}

void DistributionCollection::append(DistributionEntry entry) {
  if (entry.order.size() != element_count(noise_shape_)) {
    throw ShapeError("collection: entry order has " + std::to_string(entry.order.size()) + " elements, noise shape " +
                     to_string(noise_shape_));
  }
  if (!is_permutation_of_range(entry.order)) throw FormatError("collection: entry order is not a permutation");
  if (!(entry.params.scale > 0.0) || !std::isfinite(entry.params.scale) || !std::isfinite(entry.params.location)) {
    throw NumericError("collection: Laplace parameters must be finite with positive scale");
  }
  if (entries_.size() >= std::numeric_limits<std::uint16_t>::max()) throw Error("collection: too many entries");
  entries_.push_back(std::move(entry));
}

bool DistributionCollection::same_persisted(const DistributionCollection& other) const {
  if (noise_shape_ != other.noise_shape_ || network_hash_ != other.network_hash_ || cut_ != other.cut_ ||
      entries_.size() != other.entries_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!entries_[i].same_persisted(other.entries_[i])) return false;
  }
  return true;
}

std::vector<std::uint8_t> encode_collection(const DistributionCollection& c) {
  ByteWriter w;
  w.text({kCollectionMagic, 4});
  w.u8(kCollectionVersion);
  w.bytes(c.network_hash());
  w.u32(c.cut());
  w.u8(static_cast<std::uint8_t>(c.noise_shape().size()));
  for (auto e : c.noise_shape()) w.u32(static_cast<std::uint32_t>(e));
  w.u16(static_cast<std::uint16_t>(c.size()));
  for (const auto& e : c.entries()) {
    w.f64(e.params.location);
    w.f64(e.params.scale);
    w.f64(e.accuracy);
    w.f64(e.sse);
    for (auto i : e.order) w.u32(i);
  }
  return w.release();
}

DistributionCollection decode_collection(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "collection file");
  if (r.text(4) != std::string_view(kCollectionMagic, 4)) throw FormatError("collection file: bad magic");
  if (const auto v = r.u8(); v != kCollectionVersion) {
    throw FormatError("collection file: unsupported version " + std::to_string(v));
  }
  Digest hash{};
  const auto h = r.bytes(hash.size());
  std::copy(h.begin(), h.end(), hash.begin());
  const auto cut = r.u32();
  const auto rank = r.u8();
  if (rank == 0) throw FormatError("collection file: rank 0 noise shape");
  Shape shape(rank);
  std::size_t p = 1;
  for (auto& e : shape) {
    e = r.u32();
    if (e == 0) throw FormatError("collection file: zero extent");
    if (p > r.remaining() / e) throw FormatError("collection file: noise shape exceeds file size");
    p *= e;
  }
  DistributionCollection c(std::move(shape), hash, cut);
  const auto count = r.u16();
  for (std::uint16_t i = 0; i < count; ++i) {
    DistributionEntry e;
    e.params.location = r.f64();
    e.params.scale = r.f64();
    e.accuracy = r.f64();
    e.sse = r.f64();
    if (p > r.remaining() / sizeof(std::uint32_t)) throw FormatError("collection file: truncated order");
    e.order.resize(p);
    for (auto& o : e.order) o = r.u32();
    try {
      c.append(std::move(e));
    } catch (const Error& err) {
      throw FormatError(std::string("collection file: ") + err.what());
    }
  }
  r.expect_end();
  return c;
}

void save_collection(const std::filesystem::path& path, const DistributionCollection& collection) {
  write_file_bytes(path, encode_collection(collection));
}

DistributionCollection load_collection(const std::filesystem::path& path) {
  return decode_collection(read_file_bytes(path));
}

DistributionCollection load_collection(const std::filesystem::path& path, const Digest& expected_network,
                                       std::size_t expected_cut) {
  auto c = load_collection(path);
  if (c.network_hash() != expected_network) {
    throw ConfigError("collection " + path.string() + " was learned for network " + to_hex(c.network_hash()) +
                      ", active network is " + to_hex(expected_network));
  }
  if (c.cut() != expected_cut) {
    throw ConfigError("collection " + path.string() + " was learned at cut " + std::to_string(c.cut()) +
                      ", active cut is " + std::to_string(expected_cut));
  }
  return c;
}

}  // namespace shredder
