#include "shredder/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shredder/byte_io.hpp"
#include "shredder/error.hpp"
#include "shredder/rng.hpp"

namespace shredder {

namespace {

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::uint32_t read_be32(ByteReader& r) {
  const auto b = r.bytes(4);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void write_be32(ByteWriter& w, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) w.u8(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint32_t> load_labels(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, "IDX labels " + path.string());
  if (read_be32(r) != kIdxLabels) throw FormatError("IDX labels " + path.string() + ": bad magic");
  const auto n = read_be32(r);
  const auto payload = r.bytes(n);
  r.expect_end();
  return {payload.begin(), payload.end()};
}

void save_labels(const std::filesystem::path& path, std::span<const std::uint32_t> labels) {
  ByteWriter w;
  write_be32(w, kIdxLabels);
  write_be32(w, static_cast<std::uint32_t>(labels.size()));
  for (auto l : labels) {
    if (l > 255) throw FormatError("IDX labels must fit in one byte");
    w.u8(static_cast<std::uint8_t>(l));
  }
  write_file_bytes(path, w.buffer());
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.inputs.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    out.inputs.push_back(inputs.at(i));
    out.labels.push_back(labels.at(i));
    if (has_private_labels()) out.private_labels.push_back(private_labels.at(i));
  }
  return out;
}

Dataset Dataset::head(std::size_t count) const {
  std::vector<std::size_t> idx(std::min(count, size()));
  std::iota(idx.begin(), idx.end(), 0);
  return subset(idx);
}

std::size_t Dataset::class_count() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

std::size_t Dataset::private_class_count() const {
  return private_labels.empty() ? 0 : *std::max_element(private_labels.begin(), private_labels.end()) + 1;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const std::optional<std::filesystem::path>& private_labels) {
  const auto bytes = read_file_bytes(images);
  ByteReader r(bytes, "IDX images " + images.string());
  if (read_be32(r) != kIdxImages) throw FormatError("IDX images " + images.string() + ": bad magic");
  const auto n = read_be32(r), rows = read_be32(r), cols = read_be32(r);
  if (rows == 0 || cols == 0) throw FormatError("IDX images: zero image extent");
  Dataset data;
  data.labels = load_labels(labels);
  if (data.labels.size() != n) throw FormatError("IDX: image and label counts differ");
  if (private_labels) {
    data.private_labels = load_labels(*private_labels);
    if (data.private_labels.size() != n) throw FormatError("IDX: image and private label counts differ");
  }
  data.inputs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto px = r.bytes(std::size_t{rows} * cols);
    Tensor t({1, rows, cols});
    for (std::size_t j = 0; j < px.size(); ++j) t[j] = static_cast<float>(px[j]) / 255.0f;
    data.inputs.push_back(std::move(t));
  }
  r.expect_end();
  return data;
}

void save_idx(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels,
              const std::optional<std::filesystem::path>& private_labels) {
  if (data.inputs.empty()) throw Error("save_idx: empty dataset");
  const auto& shape = data.inputs.front().shape();
  if (shape.size() != 3 || shape[0] != 1) throw ShapeError("save_idx: expected [1,H,W] images");
  ByteWriter w;
  write_be32(w, kIdxImages);
  write_be32(w, static_cast<std::uint32_t>(data.size()));
  write_be32(w, static_cast<std::uint32_t>(shape[1]));
  write_be32(w, static_cast<std::uint32_t>(shape[2]));
  for (const auto& img : data.inputs) {
    if (img.shape() != shape) throw ShapeError("save_idx: images differ in shape");
    for (float v : img.values()) {
      w.u8(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    }
  }
  write_file_bytes(images, w.buffer());
  save_labels(labels, data.labels);
  if (private_labels) {
    if (!data.has_private_labels()) throw Error("save_idx: dataset has no private labels");
    save_labels(*private_labels, data.private_labels);
  }
}

HoldoutSplit split_holdout(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 0.5) throw ConfigError("hold-out fraction must be in (0, 0.5]");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  CounterRng rng(seed, 0x401d);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  const auto n_hold = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(data.size())));
  if (n_hold == 0 || n_hold >= data.size()) throw ConfigError("dataset too small for a hold-out split");
  HoldoutSplit out;
  out.holdout = data.subset(std::span(idx).first(n_hold));
  out.train = data.subset(std::span(idx).subspan(n_hold));
  return out;
}

}  // namespace shredder
