#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "shredder/dataset.hpp"
#include "shredder/error.hpp"
#include "shredder/rng.hpp"

namespace shredder {

namespace {

struct Point {
  double x, y;
};
using Stroke = std::vector<Point>;

Stroke ellipse(double cx, double cy, double rx, double ry, double from = 0.0, double to = 2 * std::numbers::pi,
               int steps = 14) {
  Stroke s;
  for (int i = 0; i <= steps; ++i) {
    const double t = from + (to - from) * i / steps;
    s.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return s;
}

// Glyph skeletons in a unit box, y pointing down.
std::vector<Stroke> glyph(int digit) {
  constexpr double pi = std::numbers::pi;
  switch (digit) {
    case 0: return {ellipse(0.5, 0.5, 0.27, 0.38)};
    case 1: return {{{0.38, 0.25}, {0.52, 0.12}, {0.52, 0.88}}};
    case 2: return {{{0.26, 0.3}, {0.36, 0.15}, {0.58, 0.11}, {0.72, 0.24}, {0.68, 0.42}, {0.26, 0.88}, {0.78, 0.88}}};
    case 3:
      return {{{0.26, 0.14}, {0.7, 0.14}, {0.46, 0.44}, {0.68, 0.56}, {0.7, 0.76}, {0.52, 0.9}, {0.26, 0.83}}};
    case 4: return {{{0.62, 0.88}, {0.62, 0.12}, {0.22, 0.62}, {0.8, 0.62}}};
    case 5:
      return {{{0.72, 0.12}, {0.34, 0.12}, {0.3, 0.45}, {0.56, 0.42}, {0.72, 0.58}, {0.68, 0.8}, {0.5, 0.9},
               {0.26, 0.84}}};
    case 6: {
      Stroke s{{0.66, 0.1}, {0.44, 0.28}, {0.31, 0.52}};
      auto loop = ellipse(0.5, 0.68, 0.2, 0.21, pi, 3 * pi);
      s.insert(s.end(), loop.begin(), loop.end());
      return {s};
    }
    case 7: return {{{0.22, 0.12}, {0.78, 0.12}, {0.44, 0.88}}};
    case 8: return {ellipse(0.5, 0.3, 0.18, 0.17), ellipse(0.5, 0.68, 0.22, 0.21)};
    case 9: return {ellipse(0.5, 0.32, 0.2, 0.19), {{0.7, 0.32}, {0.64, 0.88}}};
    default: throw Error("glyph: digit out of range");
  }
}

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

Dataset generate_digits(const SyntheticDigitsConfig& config) {
  if (config.image_size < 8) throw ConfigError("synthetic digits: image_size must be >= 8");
  const auto size = config.image_size;
  const double box = 0.72 * static_cast<double>(size);  // glyph box in pixels, MNIST-like margin
  Dataset data;
  data.inputs.reserve(config.count);
  CounterRng rng(config.seed, 0xd161);
  for (std::size_t n = 0; n < config.count; ++n) {
    const int digit = static_cast<int>(rng.below(10));
    const double thickness = 0.9 + 1.8 * rng.uniform();  // stroke half-width, pixels
    const std::uint32_t thickness_class = thickness < 1.5 ? 0 : (thickness < 2.1 ? 1 : 2);
    const double angle = (rng.uniform() - 0.5) * 0.42;
    const double scale = 0.82 + 0.22 * rng.uniform();
    const double shear = (rng.uniform() - 0.5) * 0.4;
    const double tx = (rng.uniform() - 0.5) * 4.0, ty = (rng.uniform() - 0.5) * 4.0;
    const double c = std::cos(angle), s = std::sin(angle);

    std::vector<std::pair<Point, Point>> segments;
    for (auto stroke : glyph(digit)) {
      for (auto& p : stroke) {
        double x = p.x - 0.5 + (rng.uniform() - 0.5) * 0.06;
        double y = p.y - 0.5 + (rng.uniform() - 0.5) * 0.06;
        x += shear * y;
        const double rx = c * x - s * y, ry = s * x + c * y;
        p = {static_cast<double>(size) / 2.0 + tx + rx * box * scale,
             static_cast<double>(size) / 2.0 + ty + ry * box * scale};
      }
      for (std::size_t i = 1; i < stroke.size(); ++i) segments.emplace_back(stroke[i - 1], stroke[i]);
    }

    Tensor img({1, size, size});
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const Point p{static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5};
        double d = 1e9;
        for (const auto& [a, b] : segments) d = std::min(d, segment_distance(p, a, b));
        double v = std::clamp(thickness - d + 0.5, 0.0, 1.0);
        v += config.pixel_noise * rng.normal();
        // Quantize like an 8-bit image so IDX round trips are exact.
        img[y * size + x] = static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f;
      }
    }
    data.inputs.push_back(std::move(img));
    data.labels.push_back(static_cast<std::uint32_t>(digit));
    data.private_labels.push_back(thickness_class);
  }
  return data;
}

}  // namespace shredder
