#include "shredder/layers.hpp"

#include <cmath>
#include <limits>

#include "shredder/error.hpp"

namespace shredder {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::fc: return "fc";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::flatten: return "flatten";
  }
  return "unknown";
}

std::optional<LayerKind> parse_layer_kind(const std::string& text) {
  if (text == "conv2d") return LayerKind::conv2d;
  if (text == "fc") return LayerKind::fc;
  if (text == "relu") return LayerKind::relu;
  if (text == "maxpool2d") return LayerKind::maxpool2d;
  if (text == "flatten") return LayerKind::flatten;
  return std::nullopt;
}

Shape LayerSpec::weight_shape() const {
  switch (kind) {
    case LayerKind::conv2d: return {out_channels, input_shape.at(0), kernel, kernel};
    case LayerKind::fc: return {out_features, element_count(input_shape)};
    default: return {};
  }
}

Shape LayerSpec::bias_shape() const {
  switch (kind) {
    case LayerKind::conv2d: return {out_channels};
    case LayerKind::fc: return {out_features};
    default: return {};
  }
}

namespace {

[[noreturn]] void layer_error(const LayerSpec& spec, const std::string& msg) {
  throw ShapeError("layer '" + spec.name + "' (" + to_string(spec.kind) + "): " + msg);
}

std::size_t window_extent(const LayerSpec& spec, std::size_t in, std::size_t pad) {
  if (spec.kernel == 0 || spec.stride == 0) layer_error(spec, "kernel and stride must be positive");
  if (in + 2 * pad < spec.kernel) layer_error(spec, "kernel larger than padded input");
  return (in + 2 * pad - spec.kernel) / spec.stride + 1;
}

void check_input(const Layer& layer, const Tensor& input) {
  if (input.shape() != layer.spec.input_shape) {
    layer_error(layer.spec, "expected input " + to_string(layer.spec.input_shape) + ", got " +
                                to_string(input.shape()));
  }
}

void check_params(const Layer& layer) {
  const auto& s = layer.spec;
  if (!layer.weight || !layer.bias) layer_error(s, "missing parameters");
  if (layer.weight->shape() != s.weight_shape()) {
    layer_error(s, "weight shape " + to_string(layer.weight->shape()) + " != " + to_string(s.weight_shape()));
  }
  if (layer.bias->shape() != s.bias_shape()) {
    layer_error(s, "bias shape " + to_string(layer.bias->shape()) + " != " + to_string(s.bias_shape()));
  }
}

Tensor conv_forward(const Layer& layer, const Tensor& in) {
  const auto& s = layer.spec;
  const std::size_t channels = s.input_shape[0], height = s.input_shape[1], width = s.input_shape[2];
  const std::size_t outs = s.output_shape[0], oh = s.output_shape[1], ow = s.output_shape[2];
  const std::size_t k = s.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(s.padding);
  const float* w = layer.weight->data();
  const float* x = in.data();
  Tensor out(s.output_shape);
  for (std::size_t o = 0; o < outs; ++o) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = (*layer.bias)[o];
        const auto y0 = static_cast<std::ptrdiff_t>(oy * s.stride) - pad;
        const auto x0 = static_cast<std::ptrdiff_t>(ox * s.stride) - pad;
        for (std::size_t c = 0; c < channels; ++c) {
          const float* wk = w + ((o * channels + c) * k) * k;
          const float* xc = x + c * height * width;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto iy = y0 + static_cast<std::ptrdiff_t>(ky);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
            const float* row = xc + static_cast<std::size_t>(iy) * width;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto ix = x0 + static_cast<std::ptrdiff_t>(kx);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
              acc += static_cast<double>(wk[ky * k + kx]) * row[ix];
            }
          }
        }
        out[(o * oh + oy) * ow + ox] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor conv_backward(const Layer& layer, const Tensor& in, const Tensor& grad, ParamGradients* params) {
  const auto& s = layer.spec;
  const std::size_t channels = s.input_shape[0], height = s.input_shape[1], width = s.input_shape[2];
  const std::size_t outs = s.output_shape[0], oh = s.output_shape[1], ow = s.output_shape[2];
  const std::size_t k = s.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(s.padding);
  const float* w = layer.weight->data();
  const float* x = in.data();

  std::vector<double> gin(in.size(), 0.0);
  std::vector<double> gw(params ? layer.weight->size() : 0, 0.0);
  std::vector<double> gb(params ? outs : 0, 0.0);
  for (std::size_t o = 0; o < outs; ++o) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double g = grad[(o * oh + oy) * ow + ox];
        if (params) gb[o] += g;
        if (g == 0.0) continue;
        const auto y0 = static_cast<std::ptrdiff_t>(oy * s.stride) - pad;
        const auto x0 = static_cast<std::ptrdiff_t>(ox * s.stride) - pad;
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t wbase = ((o * channels + c) * k) * k;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto iy = y0 + static_cast<std::ptrdiff_t>(ky);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto ix = x0 + static_cast<std::ptrdiff_t>(kx);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
              const std::size_t xi = (c * height + static_cast<std::size_t>(iy)) * width + static_cast<std::size_t>(ix);
              gin[xi] += static_cast<double>(w[wbase + ky * k + kx]) * g;
              if (params) gw[wbase + ky * k + kx] += static_cast<double>(x[xi]) * g;
            }
          }
        }
      }
    }
  }
  if (params) {
    auto accumulate = [&](const std::string& name, const Shape& shape, const std::vector<double>& values) {
      auto [it, inserted] = params->try_emplace(name, Tensor(shape));
      for (std::size_t i = 0; i < values.size(); ++i) it->second[i] += static_cast<float>(values[i]);
    };
    accumulate(s.weight_name(), layer.weight->shape(), gw);
    accumulate(s.bias_name(), layer.bias->shape(), gb);
  }
  Tensor out(in.shape());
  for (std::size_t i = 0; i < gin.size(); ++i) out[i] = static_cast<float>(gin[i]);
  return out;
}

Tensor fc_forward(const Layer& layer, const Tensor& in) {
  const auto& s = layer.spec;
  const std::size_t fan_in = in.size();
  Tensor out(s.output_shape);
  const float* w = layer.weight->data();
  for (std::size_t o = 0; o < s.out_features; ++o) {
    double acc = (*layer.bias)[o];
    const float* row = w + o * fan_in;
    for (std::size_t i = 0; i < fan_in; ++i) acc += static_cast<double>(row[i]) * in[i];
    out[o] = static_cast<float>(acc);
  }
  return out;
}

Tensor fc_backward(const Layer& layer, const Tensor& in, const Tensor& grad, ParamGradients* params) {
  const auto& s = layer.spec;
  const std::size_t fan_in = in.size();
  const float* w = layer.weight->data();
  std::vector<double> gin(fan_in, 0.0);
  for (std::size_t o = 0; o < s.out_features; ++o) {
    const double g = grad[o];
    const float* row = w + o * fan_in;
    for (std::size_t i = 0; i < fan_in; ++i) gin[i] += static_cast<double>(row[i]) * g;
  }
  if (params) {
    auto [wit, w_new] = params->try_emplace(s.weight_name(), Tensor(layer.weight->shape()));
    auto [bit, b_new] = params->try_emplace(s.bias_name(), Tensor(layer.bias->shape()));
    for (std::size_t o = 0; o < s.out_features; ++o) {
      const float g = grad[o];
      bit->second[o] += g;
      float* gw = wit->second.data() + o * fan_in;
      for (std::size_t i = 0; i < fan_in; ++i) gw[i] += g * in[i];
    }
  }
  Tensor out(in.shape());
  for (std::size_t i = 0; i < fan_in; ++i) out[i] = static_cast<float>(gin[i]);
  return out;
}

Tensor maxpool_forward(const Layer& layer, const Tensor& in, std::vector<std::uint32_t>* argmax) {
  const auto& s = layer.spec;
  const std::size_t channels = s.input_shape[0], height = s.input_shape[1], width = s.input_shape[2];
  const std::size_t oh = s.output_shape[1], ow = s.output_shape[2];
  Tensor out(s.output_shape);
  if (argmax) argmax->assign(out.size(), 0);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        // Row-major window scan with strict '>' keeps the lowest flat index on ties.
        float best = -std::numeric_limits<float>::infinity();
        std::size_t best_index = (c * height + oy * s.stride) * width + ox * s.stride;
        for (std::size_t ky = 0; ky < s.kernel; ++ky) {
          for (std::size_t kx = 0; kx < s.kernel; ++kx) {
            const std::size_t idx = (c * height + oy * s.stride + ky) * width + ox * s.stride + kx;
            if (in[idx] > best) {
              best = in[idx];
              best_index = idx;
            }
          }
        }
        const std::size_t o = (c * oh + oy) * ow + ox;
        out[o] = best;
        if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best_index);
      }
    }
  }
  return out;
}

}  // namespace

Shape infer_output_shape(const LayerSpec& spec, const Shape& input) {
  switch (spec.kind) {
    case LayerKind::conv2d: {
      if (input.size() != 3) layer_error(spec, "expects rank-3 [C,H,W] input, got " + to_string(input));
      if (spec.out_channels == 0) layer_error(spec, "out_channels must be positive");
      return {spec.out_channels, window_extent(spec, input[1], spec.padding),
              window_extent(spec, input[2], spec.padding)};
    }
    case LayerKind::maxpool2d: {
      if (input.size() != 3) layer_error(spec, "expects rank-3 [C,H,W] input, got " + to_string(input));
      return {input[0], window_extent(spec, input[1], 0), window_extent(spec, input[2], 0)};
    }
    case LayerKind::fc: {
      if (input.size() != 1) layer_error(spec, "expects rank-1 input, got " + to_string(input));
      if (spec.out_features == 0) layer_error(spec, "out_features must be positive");
      return {spec.out_features};
    }
    case LayerKind::relu: return input;
    case LayerKind::flatten: return {element_count(input)};
  }
  layer_error(spec, "unknown layer kind");
}

Tensor forward_layer(const Layer& layer, const Tensor& input, std::vector<std::uint32_t>* argmax) {
  check_input(layer, input);
  Tensor out;
  switch (layer.spec.kind) {
    case LayerKind::conv2d:
      check_params(layer);
      out = conv_forward(layer, input);
      break;
    case LayerKind::fc:
      check_params(layer);
      out = fc_forward(layer, input);
      break;
    case LayerKind::relu:
      out = input;
      for (float& v : out.values()) v = v > 0.0f ? v : 0.0f;
      break;
    case LayerKind::maxpool2d: out = maxpool_forward(layer, input, argmax); break;
    case LayerKind::flatten: out = input.reshaped({input.size()}); break;
  }
  require_finite(out, "forward of layer '" + layer.spec.name + "'");
  return out;
}

Tensor backward_layer(const Layer& layer, const Tensor& input, const Tensor& grad_output,
                      std::span<const std::uint32_t> argmax, ParamGradients* params) {
  check_input(layer, input);
  if (grad_output.shape() != layer.spec.output_shape) {
    layer_error(layer.spec, "gradient shape " + to_string(grad_output.shape()) + " != output " +
                                to_string(layer.spec.output_shape));
  }
  Tensor out;
  switch (layer.spec.kind) {
    case LayerKind::conv2d: out = conv_backward(layer, input, grad_output, params); break;
    case LayerKind::fc: out = fc_backward(layer, input, grad_output, params); break;
    case LayerKind::relu:
      out = Tensor(input.shape());
      for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0f ? grad_output[i] : 0.0f;
      break;
    case LayerKind::maxpool2d:
      if (argmax.size() != grad_output.size()) layer_error(layer.spec, "missing recorded argmax for backward");
      out = Tensor(input.shape());
      for (std::size_t o = 0; o < grad_output.size(); ++o) out[argmax[o]] += grad_output[o];
      break;
    case LayerKind::flatten: out = grad_output.reshaped(input.shape()); break;
  }
  require_finite(out, "backward of layer '" + layer.spec.name + "'");
  return out;
}

}  // namespace shredder
