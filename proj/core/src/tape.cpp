#include "shredder/tape.hpp"

#include <algorithm>
#include <cmath>

#include "shredder/error.hpp"

namespace shredder {

Tape::ValueId Tape::leaf(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

Tape::ValueId Tape::add(ValueId lhs, ValueId rhs) {
  Node node;
  node.op = Op::add;
  node.inputs = {lhs, rhs};
  node.value = shredder::add(value(lhs), value(rhs));
  require_finite(node.value, "tape add");
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

Tape::ValueId Tape::apply(const Layer& layer, ValueId input) {
  Node node;
  node.op = Op::layer;
  node.inputs = {input};
  node.layer = &layer;
  node.value = forward_layer(layer, value(input), &node.argmax);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

Tape::ValueId Tape::apply_all(std::span<const Layer> layers, ValueId input) {
  ValueId id = input;
  for (const auto& layer : layers) id = apply(layer, id);
  return id;
}

std::vector<Tensor> Tape::backward(ValueId output, const Tensor& seed, ParamGradients* params) const {
  require_same_shape(value(output), seed, "tape backward seed");
  std::vector<Tensor> grads(nodes_.size());
  grads[output] = seed;
  for (std::size_t i = output + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (grads[i].empty() || node.op == Op::leaf) continue;
    auto accumulate = [&](ValueId target, Tensor g) {
      if (grads[target].empty()) {
        grads[target] = std::move(g);
      } else {
        grads[target] = shredder::add(grads[target], g);
      }
    };
    if (node.op == Op::add) {
      // d(x + y)/dx = d(x + y)/dy = 1
      accumulate(node.inputs[0], grads[i]);
      accumulate(node.inputs[1], grads[i]);
    } else {
      accumulate(node.inputs[0],
                 backward_layer(*node.layer, value(node.inputs[0]), grads[i], node.argmax, params));
    }
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].empty()) grads[i] = Tensor(nodes_[i].value.shape());
  }
  return grads;
}

namespace {

void check_logits(const Tensor& logits, std::size_t label) {
  if (logits.rank() != 1) throw ShapeError("cross_entropy expects rank-1 logits, got " + to_string(logits.shape()));
  if (label >= logits.size()) {
    throw Error("cross_entropy label " + std::to_string(label) + " out of range [0, " +
                std::to_string(logits.size()) + ")");
  }
}

double log_sum_exp(const Tensor& logits) {
  double max = logits[0];
  for (float v : logits.values()) max = std::max(max, static_cast<double>(v));
  double s = 0.0;
  for (float v : logits.values()) s += std::exp(static_cast<double>(v) - max);
  return max + std::log(s);
}

}  // namespace

double cross_entropy(const Tensor& logits, std::size_t label) {
  check_logits(logits, label);
  return log_sum_exp(logits) - static_cast<double>(logits[label]);
}

LossAndGrad cross_entropy_with_grad(const Tensor& logits, std::size_t label) {
  check_logits(logits, label);
  const double lse = log_sum_exp(logits);
  LossAndGrad out;
  out.loss = lse - static_cast<double>(logits[label]);
  out.grad = Tensor(logits.shape());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.grad[i] = static_cast<float>(std::exp(static_cast<double>(logits[i]) - lse) - (i == label ? 1.0 : 0.0));
  }
  return out;
}

NoiseGradient grad_wrt_noise(std::span<const Layer> cloud_layers, const Tensor& activation, const Tensor& noise,
                             const LogitLoss& loss) {
  require_same_shape(activation, noise, "grad_wrt_noise");
  Tape tape;
  const auto a = tape.leaf(activation);
  const auto n = tape.leaf(noise);
  const auto noisy = tape.add(a, n);
  const auto logits = tape.apply_all(cloud_layers, noisy);
  LossAndGrad lg = loss(tape.value(logits));
  if (!std::isfinite(lg.loss)) throw NumericError("grad_wrt_noise: non-finite loss");
  auto grads = tape.backward(logits, lg.grad);
  require_finite(grads[n], "grad_wrt_noise");
  return {lg.loss, tape.value(logits), std::move(grads[n])};
}

}  // namespace shredder
