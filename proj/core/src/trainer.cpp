#include "shredder/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shredder/error.hpp"
#include "shredder/rng.hpp"
#include "shredder/tape.hpp"

namespace shredder {

Weights init_weights(const NetworkSpec& spec, std::uint64_t seed) {
  NetworkSpec resolved = spec;
  resolve_shapes(resolved);
  CounterRng rng(seed, 0x1417);
  Weights w;
  for (const auto& l : resolved.layers) {
    if (!is_computational(l.kind)) continue;
    Tensor weight(l.weight_shape());
    const std::size_t fan_in = weight.size() / weight.shape()[0];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < weight.size(); ++i) weight[i] = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
    w.insert(l.weight_name(), std::move(weight));
    w.insert(l.bias_name(), Tensor(l.bias_shape()));
  }
  return w;
}

Weights train_classifier(const NetworkSpec& spec, Weights initial, const std::vector<Tensor>& inputs,
                         const std::vector<std::uint32_t>& labels, const ClassifierTrainConfig& config,
                         const std::function<void(std::size_t, double)>& on_epoch) {
  if (inputs.size() != labels.size() || inputs.empty()) throw Error("train_classifier: inputs/labels mismatch");
  if (config.batch_size == 0) throw ConfigError("train_classifier: batch_size must be positive");
  NetworkSpec resolved = spec;
  resolve_shapes(resolved);
  if (config.noise_scale > 0.0 && (config.noise_cut == 0 || config.noise_cut >= resolved.layers.size())) {
    throw ConfigError("train_classifier: noise_cut must name an interior layer");
  }

  // Mutable parameter storage shared with the layers; layers see it as const.
  std::map<std::string, std::shared_ptr<Tensor>> params;
  std::map<std::string, Tensor> velocity;
  for (const auto& [name, t] : initial.entries()) {
    params[name] = std::make_shared<Tensor>(*t);
    velocity[name] = Tensor(t->shape());
  }
  std::vector<Layer> layers;
  for (const auto& ls : resolved.layers) {
    Layer layer{ls, nullptr, nullptr};
    if (is_computational(ls.kind)) {
      auto w = params.find(ls.weight_name());
      auto b = params.find(ls.bias_name());
      if (w == params.end() || b == params.end()) throw FormatError("train_classifier: missing parameters for " + ls.name);
      layer.weight = w->second;
      layer.bias = b->second;
    }
    layers.push_back(std::move(layer));
  }

  CounterRng rng(config.seed, 0x7a11);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      ParamGradients grads;
      for (std::size_t k = start; k < end; ++k) {
        Tape tape;
        auto out = tape.leaf(inputs[order[k]]);
        if (config.noise_scale > 0.0) {
          const std::span<const Layer> all(layers);
          out = tape.apply_all(all.first(config.noise_cut), out);
          // Relative to the activation's RMS so the network cannot outgrow it.
          const double scale = config.noise_scale * rng.uniform() * std::sqrt(mean_square(tape.value(out)));
          Tensor noise(tape.value(out).shape());
          for (float& v : noise.values()) v = static_cast<float>(rng.laplace(0.0, scale));
          out = tape.add(out, tape.leaf(std::move(noise)));
          out = tape.apply_all(all.subspan(config.noise_cut), out);
        } else {
          out = tape.apply_all(layers, out);
        }
        auto lg = cross_entropy_with_grad(tape.value(out), labels[order[k]]);
        total += lg.loss;
        tape.backward(out, lg.grad, &grads);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto& [name, g] : grads) {
        Tensor& p = *params.at(name);
        Tensor& v = velocity.at(name);
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double step = g[i] * scale + config.weight_decay * p[i];
          v[i] = static_cast<float>(config.momentum * v[i] + step);
          p[i] = static_cast<float>(p[i] - config.learning_rate * v[i]);
        }
      }
    }
    if (on_epoch) on_epoch(epoch, total / static_cast<double>(order.size()));
  }

  Weights out;
  for (const auto& [name, t] : initial.entries()) {
    const Tensor& p = *params.at(name);
    if (!p.all_finite()) throw NumericError("train_classifier: parameters diverged");
    out.insert(name, p);
  }
  return out;
}

double accuracy(const Network& network, const std::vector<Tensor>& inputs, const std::vector<std::uint32_t>& labels) {
  if (inputs.empty() || inputs.size() != labels.size()) throw Error("accuracy: inputs/labels mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) hits += argmax(network.forward(inputs[i])) == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(inputs.size());
}

}  // namespace shredder
