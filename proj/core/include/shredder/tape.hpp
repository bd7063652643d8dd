#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "shredder/layers.hpp"
#include "shredder/tensor.hpp"

namespace shredder {

// Reverse-mode tape over a sequential computation. Values are appended in
// evaluation order, so the tape is topologically sorted by construction.
class Tape {
 public:
  using ValueId = std::size_t;

  ValueId leaf(Tensor value);
  ValueId add(ValueId lhs, ValueId rhs);
  ValueId apply(const Layer& layer, ValueId input);
  // Applies the layers in order and returns the id of the last output.
  ValueId apply_all(std::span<const Layer> layers, ValueId input);

  const Tensor& value(ValueId id) const { return nodes_.at(id).value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse sweep seeded with d(loss)/d(value(output)). Returns one gradient
  // per recorded value (zero for values that do not reach `output`).
  std::vector<Tensor> backward(ValueId output, const Tensor& seed, ParamGradients* params = nullptr) const;

 private:
  enum class Op { leaf, add, layer };
  struct Node {
    Op op = Op::leaf;
    std::vector<ValueId> inputs;
    const Layer* layer = nullptr;
    Tensor value;
    std::vector<std::uint32_t> argmax;
  };
  std::vector<Node> nodes_;
};

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad;  // d(loss)/d(logits)
};

// -log softmax(logits)[label] with log-sum-exp stabilization.
double cross_entropy(const Tensor& logits, std::size_t label);
LossAndGrad cross_entropy_with_grad(const Tensor& logits, std::size_t label);

using LogitLoss = std::function<LossAndGrad(const Tensor& logits)>;

struct NoiseGradient {
  double loss = 0.0;
  Tensor logits;
  Tensor grad;  // d(loss)/d(noise), shaped like the noise
};

// Gradient of loss(cloud(a + n)) w.r.t. n. The adder's local derivative is
// the identity, so the result is d(loss)/d(a + n). Cloud parameters only
// receive reads.
NoiseGradient grad_wrt_noise(std::span<const Layer> cloud_layers, const Tensor& activation, const Tensor& noise,
                             const LogitLoss& loss);

}  // namespace shredder
