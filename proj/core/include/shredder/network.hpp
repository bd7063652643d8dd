#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shredder/hash.hpp"
#include "shredder/layers.hpp"
#include "shredder/tensor.hpp"

namespace shredder {

// Named, immutable parameter tensors in file order.
class Weights {
 public:
  using Entry = std::pair<std::string, std::shared_ptr<const Tensor>>;

  void insert(std::string name, Tensor tensor);
  std::shared_ptr<const Tensor> find(const std::string& name) const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
};

// Weights file: "SHRW", version 0x01, u32 count, then per tensor
// u16 name length, UTF-8 name, u8 rank, u32 extents, f32 payload.
std::vector<std::uint8_t> encode_weights(const Weights& weights);
Weights decode_weights(std::span<const std::uint8_t> bytes);
Weights load_weights(const std::filesystem::path& path);
void save_weights(const std::filesystem::path& path, const Weights& weights);
// SHA-256 over the encoded parameter buffers.
Digest weights_digest(const Weights& weights);

struct NetworkSpec {
  std::string name;
  Shape input_shape;
  std::size_t classes = 0;
  std::vector<LayerSpec> layers;
};

// Parses the YAML topology and resolves every layer's input/output shape.
NetworkSpec parse_network_spec(const std::string& yaml_text);
NetworkSpec load_network_spec(const std::filesystem::path& path);
std::string to_yaml(const NetworkSpec& spec);
void save_network_spec(const std::filesystem::path& path, const NetworkSpec& spec);
// Recomputes shapes; throws when consecutive layers do not compose or the
// last layer does not emit `classes` logits.
void resolve_shapes(NetworkSpec& spec);

// Frozen network: topology plus bound parameters. Immutable after build.
class Network {
 public:
  static std::shared_ptr<const Network> build(NetworkSpec spec, Weights weights);
  static std::shared_ptr<const Network> load(const std::filesystem::path& spec_file,
                                             const std::filesystem::path& weights_file);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const Weights& weights() const noexcept { return weights_; }
  std::span<const Layer> layers() const noexcept { return layers_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t computational_layer_count() const;

  Tensor forward(const Tensor& input) const;
  // Output of layers [0, count).
  Tensor forward_prefix(const Tensor& input, std::size_t count) const;
  // Topology and parameters digest; identifies the network in collection files.
  const Digest& identity() const noexcept { return identity_; }

 private:
  Network() = default;
  NetworkSpec spec_;
  Weights weights_;
  std::vector<Layer> layers_;
  Digest identity_{};
};

// Edge = layers [0, cut), cloud = layers [cut, K).
class Split {
 public:
  Split(std::shared_ptr<const Network> network, std::size_t cut);

  const Network& network() const noexcept { return *network_; }
  std::shared_ptr<const Network> network_ptr() const noexcept { return network_; }
  std::size_t cut() const noexcept { return cut_; }
  std::span<const Layer> edge_layers() const noexcept { return network_->layers().first(cut_); }
  std::span<const Layer> cloud_layers() const noexcept { return network_->layers().subspan(cut_); }
  const Shape& activation_shape() const noexcept { return network_->layers()[cut_].spec.input_shape; }

 private:
  std::shared_ptr<const Network> network_;
  std::size_t cut_;
};

// Empty string when `cut` is a valid split point, otherwise the reason.
std::string split_violation(const NetworkSpec& spec, std::size_t cut);
std::vector<std::size_t> valid_cuts(const NetworkSpec& spec);
Split make_split(std::shared_ptr<const Network> network, std::size_t cut);

Tensor run_edge(const Split& split, const Tensor& input);
Tensor run_cloud(const Split& split, const Tensor& noisy_activation);

std::size_t argmax(const Tensor& logits);

}  // namespace shredder
