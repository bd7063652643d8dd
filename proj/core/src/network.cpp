#include "shredder/network.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "shredder/byte_io.hpp"
#include "shredder/error.hpp"

namespace shredder {

namespace {

std::size_t get_size(const YAML::Node& node, const std::string& key, std::size_t fallback, bool required) {
  const auto v = node[key];
  if (!v) {
    if (required) throw FormatError("network spec: missing '" + key + "'");
    return fallback;
  }
  try {
    const long long x = v.as<long long>();
    if (x < 0) throw FormatError("network spec: '" + key + "' must be non-negative");
    return static_cast<std::size_t>(x);
  } catch (const YAML::Exception&) {
    throw FormatError("network spec: '" + key + "' is not an integer");
  }
}

LayerSpec parse_layer(const YAML::Node& node, std::size_t index) {
  if (!node.IsMap()) throw FormatError("network spec: layer " + std::to_string(index) + " is not a mapping");
  static const std::set<std::string> kKeys = {"name",   "kind",    "out_channels", "out_features",
                                              "kernel", "stride",  "padding"};
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!kKeys.contains(key)) throw FormatError("network spec: unknown layer key '" + key + "'");
  }
  LayerSpec s;
  s.name = node["name"] ? node["name"].as<std::string>() : "layer" + std::to_string(index);
  if (!node["kind"]) throw FormatError("network spec: layer '" + s.name + "' has no kind");
  const auto kind_text = node["kind"].as<std::string>();
  const auto kind = parse_layer_kind(kind_text);
  if (!kind) throw FormatError("network spec: layer '" + s.name + "' has unknown kind '" + kind_text + "'");
  s.kind = *kind;
  switch (s.kind) {
    case LayerKind::conv2d:
      s.out_channels = get_size(node, "out_channels", 0, true);
      s.kernel = get_size(node, "kernel", 0, true);
      s.stride = get_size(node, "stride", 1, false);
      s.padding = get_size(node, "padding", 0, false);
      break;
    case LayerKind::maxpool2d:
      s.kernel = get_size(node, "kernel", 0, true);
      s.stride = get_size(node, "stride", s.kernel, false);
      break;
    case LayerKind::fc: s.out_features = get_size(node, "out_features", 0, true); break;
    case LayerKind::relu:
    case LayerKind::flatten: break;
  }
  return s;
}

}  // namespace

void resolve_shapes(NetworkSpec& spec) {
  if (spec.layers.empty()) throw FormatError("network spec: no layers");
  if (spec.input_shape.empty() || element_count(spec.input_shape) == 0) {
    throw FormatError("network spec: invalid input shape " + to_string(spec.input_shape));
  }
  std::set<std::string> names;
  Shape current = spec.input_shape;
  for (auto& layer : spec.layers) {
    if (!names.insert(layer.name).second) throw FormatError("network spec: duplicate layer name '" + layer.name + "'");
    layer.input_shape = current;
    layer.output_shape = infer_output_shape(layer, current);
    current = layer.output_shape;
  }
  if (current.size() != 1 || current[0] != spec.classes) {
    throw ShapeError("network spec: last layer emits " + to_string(current) + ", expected [" +
                     std::to_string(spec.classes) + "] logits");
  }
}

NetworkSpec parse_network_spec(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw FormatError(std::string("network spec: ") + e.what());
  }
  if (!root.IsMap()) throw FormatError("network spec: top level must be a mapping");
  NetworkSpec spec;
  try {
    spec.name = root["name"] ? root["name"].as<std::string>() : "network";
    if (!root["input"] || !root["input"].IsSequence()) throw FormatError("network spec: missing 'input' extents");
    for (const auto& e : root["input"]) spec.input_shape.push_back(e.as<std::size_t>());
    spec.classes = get_size(root, "classes", 0, true);
    if (!root["layers"] || !root["layers"].IsSequence()) throw FormatError("network spec: missing 'layers'");
    std::size_t i = 0;
    for (const auto& node : root["layers"]) spec.layers.push_back(parse_layer(node, i++));
  } catch (const YAML::Exception& e) {
    throw FormatError(std::string("network spec: ") + e.what());
  }
  resolve_shapes(spec);
  return spec;
}

NetworkSpec load_network_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open network spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_network_spec(ss.str());
}

std::string to_yaml(const NetworkSpec& spec) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << spec.name;
  out << YAML::Key << "input" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto e : spec.input_shape) out << e;
  out << YAML::EndSeq;
  out << YAML::Key << "classes" << YAML::Value << spec.classes;
  out << YAML::Key << "layers" << YAML::Value << YAML::BeginSeq;
  for (const auto& l : spec.layers) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << l.name;
    out << YAML::Key << "kind" << YAML::Value << to_string(l.kind);
    switch (l.kind) {
      case LayerKind::conv2d:
        out << YAML::Key << "out_channels" << YAML::Value << l.out_channels;
        out << YAML::Key << "kernel" << YAML::Value << l.kernel;
        out << YAML::Key << "stride" << YAML::Value << l.stride;
        out << YAML::Key << "padding" << YAML::Value << l.padding;
        break;
      case LayerKind::maxpool2d:
        out << YAML::Key << "kernel" << YAML::Value << l.kernel;
        out << YAML::Key << "stride" << YAML::Value << l.stride;
        break;
      case LayerKind::fc: out << YAML::Key << "out_features" << YAML::Value << l.out_features; break;
      default: break;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void save_network_spec(const std::filesystem::path& path, const NetworkSpec& spec) {
  const auto text = to_yaml(spec);
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::shared_ptr<const Network> Network::build(NetworkSpec spec, Weights weights) {
  resolve_shapes(spec);
  std::shared_ptr<Network> net(new Network());
  for (const auto& ls : spec.layers) {
    Layer layer{ls, nullptr, nullptr};
    if (is_computational(ls.kind)) {
      for (auto [name, shape, slot] : {std::tuple{ls.weight_name(), ls.weight_shape(), &layer.weight},
                                       std::tuple{ls.bias_name(), ls.bias_shape(), &layer.bias}}) {
        auto t = weights.find(name);
        if (!t) throw FormatError("weights: missing tensor '" + name + "'");
        if (t->shape() != shape) {
          throw ShapeError("weights: tensor '" + name + "' has shape " + to_string(t->shape()) + ", expected " +
                           to_string(shape));
        }
        if (!t->all_finite()) throw NumericError("weights: tensor '" + name + "' is not finite");
        *slot = std::move(t);
      }
    }
    net->layers_.push_back(std::move(layer));
  }
  const auto topology = to_yaml(spec);
  auto bytes = encode_weights(weights);
  bytes.insert(bytes.begin(), topology.begin(), topology.end());
  net->identity_ = sha256(bytes);
  net->spec_ = std::move(spec);
  net->weights_ = std::move(weights);
  return net;
}

std::shared_ptr<const Network> Network::load(const std::filesystem::path& spec_file,
                                              const std::filesystem::path& weights_file) {
  return build(load_network_spec(spec_file), load_weights(weights_file));
}

std::size_t Network::computational_layer_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += is_computational(l.spec.kind) ? 1 : 0;
  return n;
}

Tensor Network::forward_prefix(const Tensor& input, std::size_t count) const {
  if (count > layers_.size()) throw Error("forward_prefix: layer count out of range");
  if (input.shape() != spec_.input_shape) {
    throw ShapeError("network input: expected " + to_string(spec_.input_shape) + ", got " + to_string(input.shape()));
  }
  Tensor x = input;
  for (std::size_t i = 0; i < count; ++i) x = forward_layer(layers_[i], x);
  return x;
}

Tensor Network::forward(const Tensor& input) const { return forward_prefix(input, layers_.size()); }

std::string split_violation(const NetworkSpec& spec, std::size_t cut) {
  if (cut == 0) return "cut 0 is the raw input; the edge must contain at least one computational layer";
  if (cut >= spec.layers.size()) return "cut " + std::to_string(cut) + " leaves an empty cloud partition";
  bool has_computational = false;
  for (std::size_t i = 0; i < cut; ++i) has_computational |= is_computational(spec.layers[i].kind);
  if (!has_computational) return "edge partition [0, " + std::to_string(cut) + ") has no conv2d or fc layer";
  const auto& first = spec.layers[cut];
  if (!is_computational(first.kind)) {
    return "cloud partition would start with " + to_string(first.kind) + " layer '" + first.name +
           "'; it must start with conv2d or fc";
  }
  return {};
}

std::vector<std::size_t> valid_cuts(const NetworkSpec& spec) {
  std::vector<std::size_t> cuts;
  for (std::size_t c = 1; c < spec.layers.size(); ++c) {
    if (split_violation(spec, c).empty()) cuts.push_back(c);
  }
  return cuts;
}

Split::Split(std::shared_ptr<const Network> network, std::size_t cut) : network_(std::move(network)), cut_(cut) {
  if (!network_) throw Error("split: null network");
  if (auto why = split_violation(network_->spec(), cut_); !why.empty()) throw ConfigError("invalid split: " + why);
}

Split make_split(std::shared_ptr<const Network> network, std::size_t cut) { return Split(std::move(network), cut); }

Tensor run_edge(const Split& split, const Tensor& input) { return split.network().forward_prefix(input, split.cut()); }

Tensor run_cloud(const Split& split, const Tensor& noisy_activation) {
  if (noisy_activation.shape() != split.activation_shape()) {
    throw ShapeError("run_cloud: expected activation " + to_string(split.activation_shape()) + ", got " +
                     to_string(noisy_activation.shape()));
  }
  Tensor x = noisy_activation;
  for (const auto& layer : split.cloud_layers()) x = forward_layer(layer, x);
  return x;
}

std::size_t argmax(const Tensor& logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

}  // namespace shredder
