#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shredder/tensor.hpp"

namespace shredder {

enum class LayerKind { conv2d, fc, relu, maxpool2d, flatten };

std::string to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(const std::string& text);

// conv2d and fc carry parameters; the rest are parameter-free.
inline bool is_computational(LayerKind kind) { return kind == LayerKind::conv2d || kind == LayerKind::fc; }

// Topology of one layer. Input and output shapes are resolved when the
// enclosing network is built.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  std::size_t out_channels = 0;  // conv2d
  std::size_t out_features = 0;  // fc
  std::size_t kernel = 0;        // conv2d, maxpool2d
  std::size_t stride = 1;        // conv2d, maxpool2d
  std::size_t padding = 0;       // conv2d
  Shape input_shape;
  Shape output_shape;

  std::string weight_name() const { return name + ".weight"; }
  std::string bias_name() const { return name + ".bias"; }
  // Shapes the parameter tensors must have, given input_shape.
  Shape weight_shape() const;
  Shape bias_shape() const;
};

// Output shape of `spec` applied to `input`; throws ShapeError naming the layer.
Shape infer_output_shape(const LayerSpec& spec, const Shape& input);

// A layer bound to its (immutable, shared) parameters.
struct Layer {
  LayerSpec spec;
  std::shared_ptr<const Tensor> weight;
  std::shared_ptr<const Tensor> bias;
};

// Forward evaluation of one layer. For maxpool2d the argmax flat input index
// of every output element is written to `argmax` when given.
Tensor forward_layer(const Layer& layer, const Tensor& input, std::vector<std::uint32_t>* argmax = nullptr);

// Parameter gradients keyed by parameter name, accumulated across calls.
using ParamGradients = std::map<std::string, Tensor>;

// Gradient of the loss w.r.t. the layer input given the gradient w.r.t. its
// output. `argmax` must be what forward_layer recorded for maxpool2d. When
// `params` is non-null the parameter gradients are accumulated into it; the
// layer's own parameters are never touched.
Tensor backward_layer(const Layer& layer, const Tensor& input, const Tensor& grad_output,
                      std::span<const std::uint32_t> argmax, ParamGradients* params = nullptr);

}  // namespace shredder
